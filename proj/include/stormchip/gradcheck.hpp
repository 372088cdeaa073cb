#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace stormchip {

struct GradCheckResult {
  std::string name;        // layer kind under test
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  std::size_t checked = 0;  // number of scalar derivatives compared
  double worst_analytic = 0.0;  // the pair behind max_rel_error
  double worst_numeric = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;          // central-difference step h
  double tolerance = 1e-5;     // maximum relative error
  std::size_t seeds = 20;      // random instances per layer kind
  // Derivatives smaller than this are compared on an absolute scale of
  // `floor`: with h = 1e-5 the central difference itself carries about
  // 1e-11 of round-off, so smaller magnitudes cannot be resolved relatively.
  double floor = 1e-6;
};

// |analytic - numeric| / max(|analytic|, |numeric|), with derivatives whose
// magnitudes are both below `floor` compared on an absolute scale of `floor`.
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Central finite-difference checks in 64-bit precision for every layer kind
// (conv3x3, maxpool2x2, dense, relu, leaky_relu, sigmoid, flatten, dropout)
// and the BCE + L2 loss. Each kind runs on small random networks built from
// seeds base_seed, base_seed+1, ...; every parameter and every input element
// is perturbed.
std::vector<GradCheckResult> run_gradient_checks(std::uint64_t base_seed, const GradCheckOptions& options = {});

}  // namespace stormchip
