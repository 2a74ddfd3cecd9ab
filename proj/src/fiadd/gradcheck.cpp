#include "fiadd/gradcheck.hpp"

#include <algorithm>
#include <functional>

#include "fiadd/error.hpp"
#include "fiadd/model.hpp"
#include "fiadd/objective.hpp"
#include "fiadd/rng.hpp"

namespace fiadd {

namespace {

struct Shape {
  std::vector<std::size_t> group;
  std::vector<int> group_class;
  std::vector<std::size_t> implied_owner;
};

// Groups of 2-4 points; the first group is implicit (class 2), the rest are
// other-class imposters. Most implicit points get an implied partner.
Shape random_shape(Rng& rng) {
  Shape s;
  const std::size_t G = 2 + rng.below(2);
  for (std::size_t g = 0; g < G; ++g) {
    s.group_class.push_back(g == 0 ? 2 : static_cast<int>(rng.below(2)));
    const std::size_t D = 2 + rng.below(3);
    for (std::size_t k = 0; k < D; ++k) {
      if (g == 0 && rng.uniform() < 0.8) s.implied_owner.push_back(s.group.size());
      s.group.push_back(g);
    }
  }
  return s;
}

// Points scattered around per-group centers, implied points offset from
// their owners.
std::vector<double> random_points(Rng& rng, const Shape& s, std::size_t d) {
  std::vector<Vec> centers(s.group_class.size(), Vec(d));
  for (auto& c : centers)
    for (double& x : c) x = 1.5 * rng.normal();
  std::vector<double> flat;
  for (std::size_t g : s.group)
    for (std::size_t k = 0; k < d; ++k) flat.push_back(centers[g][k] + 0.7 * rng.normal());
  for (std::size_t owner : s.implied_owner)
    for (std::size_t k = 0; k < d; ++k) flat.push_back(flat[owner * d + k] + 0.8 + 0.5 * rng.normal());
  return flat;
}

PointBatch point_batch(const Shape& s, std::span<const double> flat, std::size_t d) {
  PointBatch b;
  const std::size_t T = s.group.size();
  b.points = Matrix(T, d);
  std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(T * d), b.points.data().begin());
  b.implied = Matrix(s.implied_owner.size(), d);
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(T * d), flat.end(), b.implied.data().begin());
  b.group = s.group;
  b.group_class = s.group_class;
  b.implied_owner = s.implied_owner;
  return b;
}

ScalarGrad add_value(const PointBatch& b, const ObjectiveConfig& cfg) {
  const AddLoss a = add_loss(b, batch_stats(b), cfg);
  ScalarGrad out{a.loss, a.grad_points.data()};
  out.grad.insert(out.grad.end(), a.grad_implied.data().begin(), a.grad_implied.data().end());
  return out;
}

struct Case {
  std::vector<double> inputs;
  GradFn fn;
};

using CaseMaker = std::function<Case(Rng&)>;

Case ace_case(Rng& rng) {
  const std::size_t T = 2 + rng.below(6), C = 2 + rng.below(3);
  std::vector<int> labels(T);
  for (int& y : labels) y = static_cast<int>(rng.below(C));
  std::vector<double> weights(C);
  for (double& w : weights) w = 0.2 + 2.0 * rng.uniform();
  std::vector<double> logits(T * C);
  for (double& z : logits) z = 2.0 * rng.normal();
  return {logits, [=](std::span<const double> x) {
            Matrix m(T, C);
            std::copy(x.begin(), x.end(), m.data().begin());
            const LossGrad lg = ace_loss(m, labels, weights);
            return ScalarGrad{lg.loss, lg.grad.data()};
          }};
}

CaseMaker add_case(Variant v) {
  return [v](Rng& rng) {
    const Shape s = random_shape(rng);
    const std::size_t d = 2 + rng.below(3);
    ObjectiveConfig cfg;
    cfg.variant = v;
    cfg.alpha = 0.5 + rng.uniform();
    cfg.gamma = static_cast<double>(rng.below(4));
    return Case{random_points(rng, s, d),
                [=](std::span<const double> x) { return add_value(point_batch(s, x, d), cfg); }};
  };
}

// ce over logits taken from the first block, add over points from the rest.
Case combined_case(Rng& rng) {
  const Shape s = random_shape(rng);
  const std::size_t d = 2 + rng.below(2);
  const std::size_t T = s.group.size(), C = 3;
  std::vector<int> labels;
  for (std::size_t g : s.group) labels.push_back(s.group_class[g]);
  const double beta = 0.1 + 0.8 * rng.uniform();
  ObjectiveConfig cfg;
  std::vector<double> inputs(T * C);
  for (double& z : inputs) z = rng.normal();
  const auto pts = random_points(rng, s, d);
  inputs.insert(inputs.end(), pts.begin(), pts.end());
  return {inputs, [=](std::span<const double> x) {
            Matrix m(T, C);
            std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(T * C), m.data().begin());
            const LossGrad lg = ace_loss(m, labels, {});
            ScalarGrad ce{lg.loss, lg.grad.data()};
            ScalarGrad add = add_value(point_batch(s, x.subspan(T * C), d), cfg);
            // Widen both to the full input vector before mixing.
            ce.grad.resize(x.size(), 0.0);
            add.grad.insert(add.grad.begin(), T * C, 0.0);
            return combined_loss(ce, add, beta);
          }};
}

CaseMaker model_case(Activation act, Variant v) {
  return [act, v](Rng& rng) {
    const Shape s = random_shape(rng);
    const std::size_t d_in = 3 + rng.below(3), d_proj = 2 + rng.below(2);
    const int C = 3;
    Params p = init_params(d_in, d_proj, C, act, rng.next_u64());
    for (double& b : p.projection.bias) b = 0.1 * rng.normal();
    for (double& b : p.classifier.bias) b = 0.1 * rng.normal();
    BatchInputs in;
    in.group = s.group;
    in.group_class = s.group_class;
    in.implied_owner = s.implied_owner;
    const auto pts = random_points(rng, s, d_in);
    const std::size_t T = s.group.size();
    in.x = Matrix(T, d_in);
    std::copy(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(T * d_in), in.x.data().begin());
    in.x_implied = Matrix(s.implied_owner.size(), d_in);
    std::copy(pts.begin() + static_cast<std::ptrdiff_t>(T * d_in), pts.end(), in.x_implied.data().begin());
    for (std::size_t g : s.group) in.labels.push_back(s.group_class[g]);
    ObjectiveConfig cfg;
    cfg.variant = v;
    cfg.class_weights = {1.0, 0.5 + rng.uniform(), 0.5 + rng.uniform()};
    return Case{p.flatten(), [=](std::span<const double> x) {
                  Params q = p;
                  q.assign(x);
                  return batch_objective(q, in, cfg).total;
                }};
  };
}

const std::vector<std::pair<std::string, CaseMaker>>& registry() {
  static const std::vector<std::pair<std::string, CaseMaker>> ops = {
      {"ace_loss", ace_case},
      {"add_loss[add]", add_case(Variant::Add)},
      {"add_loss[add-foc]", add_case(Variant::AddFoc)},
      {"add_loss[add-inf-foc]", add_case(Variant::AddInfFoc)},
      {"combined_loss", combined_case},
      {"model[identity,add-inf-foc]", model_case(Activation::Identity, Variant::AddInfFoc)},
      {"model[tanh,add-inf-foc]", model_case(Activation::Tanh, Variant::AddInfFoc)},
      {"model[tanh,ace]", model_case(Activation::Tanh, Variant::AceOnly)},
  };
  return ops;
}

}  // namespace

std::vector<std::string> gradcheck_operations() {
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

std::vector<GradCheckRow> run_gradcheck(const GradCheckOptions& opts) {
  if (opts.batches < 1) throw InvalidInput("gradcheck.batches must be >= 1");
  if (!(opts.step > 0.0)) throw InvalidInput("gradcheck.step must be positive");
  if (!opts.corrupt.empty()) {
    const auto names = gradcheck_operations();
    if (std::find(names.begin(), names.end(), opts.corrupt) == names.end())
      throw InvalidInput("gradcheck.corrupt names unknown operation '" + opts.corrupt + "'");
  }
  std::vector<GradCheckRow> rows;
  std::uint64_t op_index = 0;
  for (const auto& [name, make] : registry()) {
    GradCheckRow row;
    row.operation = name;
    const bool corrupt = name == opts.corrupt;
    for (int b = 0; b < opts.batches; ++b) {
      Rng rng(mix_seed(opts.seed, op_index * 1000 + static_cast<std::uint64_t>(b)));
      Case c = make(rng);
      GradFn fn = c.fn;
      if (corrupt)
        fn = [inner = c.fn](std::span<const double> x) {
          ScalarGrad g = inner(x);
          g.grad[0] += 0.1 * (1.0 + std::abs(g.grad[0]));
          return g;
        };
      const GradCheckResult r = grad_check(fn, c.inputs, opts.step);
      row.max_rel_error = std::max(row.max_rel_error, r.max_rel_error);
      row.coordinates += c.inputs.size();
      ++row.batches;
    }
    row.passed = row.max_rel_error < opts.tolerance;
    rows.push_back(row);
    ++op_index;
  }
  return rows;
}

}  // namespace fiadd
