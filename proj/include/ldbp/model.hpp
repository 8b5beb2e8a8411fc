#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldbp/fiber.hpp"
#include "ldbp/schedule.hpp"
#include "ldbp/signal.hpp"
#include "ldbp/transceiver.hpp"

namespace ldbp {

// One unrolled split step: filter, Kerr-type activation
// rho(x) = x exp(-i alpha |x|^2), filter.
struct LdbpLayer {
  SymmetricFilter w1;
  cplx alpha{};
  SymmetricFilter w2;

  friend bool operator==(const LdbpLayer&, const LdbpLayer&) = default;
};

struct LdbpModel {
  std::vector<LdbpLayer> layers;  // steps_per_span * span_count of them
  SymmetricFilter mf_filter;      // matched filter at the input rate
  std::size_t decimation = 2;
  std::size_t m = 0;  // output symbols
  std::size_t n = 0;  // input samples, decimation * m
  int steps_per_span = 1;
  int span_count = 1;
  bool trained = false;
  long long train_step = 0;  // optimizer steps taken so far
  nlohmann::json provenance = nlohmann::json::object();

  // Complex parameters: per layer 2 (K + 1) taps + alpha, plus MF taps.
  std::size_t complex_parameter_count() const;

  friend bool operator==(const LdbpModel& a, const LdbpModel& b);
};

struct LdbpInitOptions {
  StepSchedule schedule;
  // Use gamma * delta for alpha_i instead of the midpoint effective length.
  bool literal_gamma_delta = false;
  PulseShape shape;
  std::size_t decimation = 2;
  // > 0: fit the K taps by weighted least squares over |f| <= passband_hz
  // (see fit_symmetric_filter).  0: plain truncation of the impulse response.
  double passband_hz = 17.5e9;
  double stop_weight = 1e-4;
};

// Builds the network from the split-step scheme it unrolls: every w1/w2 is
// a K-tap symmetric approximation of the backward half-step operator,
// the first w1 of each span also carries G^-1, alpha_i = gamma * (step
// effective length), and the output layer is the block-periodic RRC
// matched filter at the receiver rate with span_symbols * decimation taps
// per side (at most n/2 - 1).
LdbpModel init_from_ssfm(const FiberParams& params, int steps_per_span, std::size_t K,
                         std::size_t m, const LdbpInitOptions& options = {});

// Elementwise activation x exp(-i alpha |x|^2), in place.
void kerr_activation_inplace(std::span<cplx> x, cplx alpha);

// Unrolled network followed by matched filtering and decimation.  Phase
// rotation is left to the caller.  Throws SizeError on |y| != n.
SymbolBlock forward(const LdbpModel& model, const ComplexSignal& y);

// Versioned JSON with taps as [re, im] pairs of IEEE doubles; a load of a
// save is bit-identical.  Throws FormatError on anything malformed.
void save_checkpoint(const LdbpModel& model, const std::filesystem::path& path);
LdbpModel load_checkpoint(const std::filesystem::path& path);
nlohmann::json checkpoint_json(const LdbpModel& model);
LdbpModel model_from_json(const nlohmann::json& j);

inline constexpr int kCheckpointVersion = 1;

}  // namespace ldbp
