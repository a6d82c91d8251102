// Reference external completion endpoint for tests and protocol debugging.
// Reads one framed request on stdin, writes one framed response on stdout.
//
//   completion_stub harmonic       solve with the built-in harmonic backend
//   completion_stub constant <z>   fill the unreliable region with z
//   completion_stub nan            leave NaN in the unreliable region
//   completion_stub bad-dims       answer with the wrong width
//   completion_stub sleep <ms>     stall, then behave like `harmonic`
//   completion_stub fail           exit 3 without answering

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <iterator>
#include <string>
#include <thread>
#include <vector>

#include "fpp/external_completion.hpp"

namespace {

fpp::ImageF64 solve_harmonic(const fpp::protocol::DecodedRequest& in) {
  fpp::DepthFrame sparse = fpp::DepthFrame::empty(in.width, in.height, fpp::Mat3{});
  for (std::size_t i = 0; i < in.sparse_depth.size(); ++i)
    if (std::isfinite(in.sparse_depth[i])) {
      sparse.z[i] = in.sparse_depth[i];
      sparse.valid[i] = 1;
    }
  fpp::CompletionRequest req{std::move(sparse), in.guidance, in.mask};
  return fpp::complete_depth_harmonic(req).frame.z;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "harmonic";
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
  try {
    const auto in = fpp::protocol::decode_request(bytes);
    fpp::ImageF64 dense = in.sparse_depth;
    if (mode == "harmonic") {
      dense = solve_harmonic(in);
    } else if (mode == "constant") {
      const double z = argc > 2 ? std::atof(argv[2]) : 500.0;
      for (std::size_t i = 0; i < dense.size(); ++i)
        if (in.mask[i]) dense[i] = z;
    } else if (mode == "nan") {
      for (std::size_t i = 0; i < dense.size(); ++i)
        if (in.mask[i]) dense[i] = std::numeric_limits<double>::quiet_NaN();
    } else if (mode == "bad-dims") {
      dense = fpp::ImageF64(in.width + 1, in.height, 500.0);
    } else if (mode == "sleep") {
      std::this_thread::sleep_for(std::chrono::milliseconds(argc > 2 ? std::atoi(argv[2]) : 1000));
      dense = solve_harmonic(in);
    } else if (mode == "fail") {
      return 3;
    } else {
      std::cerr << "unknown mode " << mode << "\n";
      return 2;
    }
    const auto out = fpp::protocol::encode_response(dense);
    std::fwrite(out.data(), 1, out.size(), stdout);
    std::fflush(stdout);
  } catch (const fpp::Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
