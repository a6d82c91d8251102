#pragma once

#include "fpp/annotations/association.hpp"
#include "fpp/annotations/components.hpp"
#include "fpp/annotations/contour.hpp"
#include "fpp/annotations/instances.hpp"
#include "fpp/annotations/labels.hpp"
#include "fpp/annotations/polygon.hpp"
#include "fpp/annotations/raster.hpp"
#include "fpp/annotations/taxonomy.hpp"
#include "fpp/bench.hpp"
#include "fpp/bench_stages.hpp"
#include "fpp/completion.hpp"
#include "fpp/dataset.hpp"
#include "fpp/external_completion.hpp"
#include "fpp/fusion.hpp"
#include "fpp/geometry.hpp"
#include "fpp/metrics.hpp"
#include "fpp/patterns.hpp"
#include "fpp/phase.hpp"
#include "fpp/pipeline.hpp"
#include "fpp/ply.hpp"
#include "fpp/scene_builder.hpp"
#include "fpp/simulator.hpp"
#include "fpp/stack_io.hpp"
