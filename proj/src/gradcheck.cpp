#include "stormchip/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "stormchip/network.hpp"
#include "stormchip/optim.hpp"

namespace stormchip {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / scale;
}

namespace {

struct Case {
  std::string name;
  Shape input;
  std::vector<LayerSpec> layers;
  double l2 = 1e-3;
};

std::vector<Case> cases() {
  using A = ActivationKind;
  return {
      {"conv3x3", {2, 5, 5}, {LayerSpec::conv(3, A::identity), LayerSpec::flatten(), LayerSpec::dense(1, A::sigmoid)}},
      {"conv3x3_same", {2, 4, 4},
       {LayerSpec::conv(2, A::identity, 0.0, Padding::same), LayerSpec::flatten(), LayerSpec::dense(1, A::sigmoid)}},
      {"maxpool2x2", {2, 7, 6}, {LayerSpec::maxpool(), LayerSpec::flatten(), LayerSpec::dense(1, A::sigmoid)}},
      {"dense", {6}, {LayerSpec::dense(4), LayerSpec::dense(1, A::sigmoid)}},
      {"relu", {6}, {LayerSpec::dense(5), LayerSpec::act(A::relu), LayerSpec::dense(1, A::sigmoid)}},
      {"leaky_relu", {6}, {LayerSpec::dense(5), LayerSpec::act(A::leaky_relu, 0.1), LayerSpec::dense(1, A::sigmoid)}},
      {"sigmoid", {6}, {LayerSpec::dense(4), LayerSpec::act(A::sigmoid), LayerSpec::dense(1, A::sigmoid)}},
      {"flatten", {2, 3, 3}, {LayerSpec::flatten(), LayerSpec::dense(1, A::sigmoid)}},
      {"dropout", {8}, {LayerSpec::dense(6), LayerSpec::dropout(0.5), LayerSpec::dense(1, A::sigmoid)}},
      {"bce_l2", {5}, {LayerSpec::dense(1, A::sigmoid)}, 0.05},
      {"bce_l2_generic_tail", {5}, {LayerSpec::dense(1, A::sigmoid), LayerSpec::dropout(0.0)}, 0.05},
      {"stack", {1, 10, 10},
       {LayerSpec::conv(3, A::relu), LayerSpec::maxpool(), LayerSpec::conv(2, A::leaky_relu, 0.1), LayerSpec::flatten(),
        LayerSpec::dropout(0.25), LayerSpec::dense(4, A::relu), LayerSpec::dense(1, A::sigmoid)}},
  };
}

GradCheckResult check_case(const Case& c, std::uint64_t seed, const GradCheckOptions& opt) {
  constexpr std::size_t batch = 3;
  Rng rng(seed);
  Network<double> net(c.input, c.layers);
  initialize_xavier(net, rng);
  // Non-zero biases so every bias path is exercised.
  for (BasicTensor<double>* t : net.parameter_tensors())
    if (t->rank() == 1)
      for (double& v : t->values()) v = rng.uniform(-0.2, 0.2);

  Shape batch_shape{batch};
  batch_shape.insert(batch_shape.end(), c.input.begin(), c.input.end());
  BasicTensor<double> x(batch_shape);
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  BasicTensor<double> labels({batch, 1});
  for (std::size_t s = 0; s < batch; ++s) labels[s] = static_cast<double>(s % 2);

  // Dropout masks must be identical across perturbed evaluations.
  const std::uint64_t mask_seed = rng.next_u64();
  auto loss_at = [&](const BasicTensor<double>& input) {
    Rng mask_rng(mask_seed);
    auto fp = forward(net, input, Mode::train, &mask_rng);
    Network<double> scratch = net;
    return backward(scratch, fp, labels, LossKind::binary_cross_entropy, c.l2).loss;
  };

  Rng mask_rng(mask_seed);
  const auto fp = forward(net, x, Mode::train, &mask_rng);
  const auto analytic = backward(net, fp, labels, LossKind::binary_cross_entropy, c.l2, true);

  GradCheckResult r;
  r.name = c.name;
  r.seed = seed;
  auto compare = [&](double a, double& slot, const BasicTensor<double>& input) {
    const double saved = slot;
    slot = saved + opt.step;
    const double up = loss_at(input);
    slot = saved - opt.step;
    const double down = loss_at(input);
    slot = saved;
    const double numeric = (up - down) / (2.0 * opt.step);
    const double err = relative_error(a, numeric, opt.floor);
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_analytic = a;
      r.worst_numeric = numeric;
    }
    ++r.checked;
  };

  auto params = net.parameter_tensors();
  std::vector<BasicTensor<double>> grads;
  for (BasicTensor<double>* g : net.gradient_tensors()) grads.push_back(*g);
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t]->size(); ++i) compare(grads[t][i], (*params[t])[i], x);

  BasicTensor<double> xp = x;
  for (std::size_t i = 0; i < xp.size(); ++i) compare(analytic.input_grad[i], xp[i], xp);

  r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error <= opt.tolerance;
  return r;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_checks(std::uint64_t base_seed, const GradCheckOptions& options) {
  std::vector<GradCheckResult> out;
  for (const Case& c : cases())
    for (std::size_t k = 0; k < options.seeds; ++k) out.push_back(check_case(c, base_seed + k, options));
  return out;
}

}  // namespace stormchip
