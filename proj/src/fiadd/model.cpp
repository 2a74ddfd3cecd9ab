#include "fiadd/model.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>

#include "fiadd/error.hpp"
#include "fiadd/rng.hpp"

namespace fiadd {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

Activation parse_activation(const std::string& text) {
  if (text == "identity" || text == "linear") return Activation::Identity;
  if (text == "tanh") return Activation::Tanh;
  throw InvalidInput("unknown activation '" + text + "' (identity, tanh)");
}

InferenceMode parse_inference_mode(const std::string& text) {
  if (text == "classifier") return InferenceMode::Classifier;
  if (text == "nearest-cluster") return InferenceMode::NearestCluster;
  throw InvalidInput("unknown inference mode '" + text + "' (classifier, nearest-cluster)");
}

std::size_t Params::size() const {
  return projection.weight.data().size() + projection.bias.size() + classifier.weight.data().size() +
         classifier.bias.size();
}

std::vector<double> Params::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  out.insert(out.end(), projection.weight.data().begin(), projection.weight.data().end());
  out.insert(out.end(), projection.bias.begin(), projection.bias.end());
  out.insert(out.end(), classifier.weight.data().begin(), classifier.weight.data().end());
  out.insert(out.end(), classifier.bias.begin(), classifier.bias.end());
  return out;
}

void Params::assign(std::span<const double> flat) {
  if (flat.size() != size()) throw InvalidInput("Params::assign: size mismatch");
  auto it = flat.begin();
  auto fill = [&](std::vector<double>& dst) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  fill(projection.weight.data());
  fill(projection.bias);
  fill(classifier.weight.data());
  fill(classifier.bias);
}

Params init_params(std::size_t d_in, std::size_t d_proj, int num_classes, Activation act, std::uint64_t seed) {
  if (d_in == 0 || d_proj == 0 || num_classes < 1) throw InvalidInput("init_params: dimensions must be positive");
  Rng rng(seed);
  auto xavier = [&](Matrix& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& x : w.data()) x = (2.0 * rng.uniform() - 1.0) * limit;
  };
  Params p;
  p.projection.weight = Matrix(d_proj, d_in);
  p.projection.bias.assign(d_proj, 0.0);
  p.projection.activation = act;
  xavier(p.projection.weight);
  p.classifier.weight = Matrix(static_cast<std::size_t>(num_classes), d_proj);
  p.classifier.bias.assign(static_cast<std::size_t>(num_classes), 0.0);
  xavier(p.classifier.weight);
  return p;
}

Vec project(const ProjectionHead& head, std::span<const double> x) {
  if (x.size() != head.d_in())
    throw InvalidInput("project: input dimension " + std::to_string(x.size()) + " does not match head d_in " +
                       std::to_string(head.d_in()));
  Vec r(head.d_proj());
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double z = dot(head.weight.row(k), x) + head.bias[k];
    r[k] = head.activation == Activation::Tanh ? std::tanh(z) : z;
  }
  return r;
}

Vec classify(const ClassificationHead& head, std::span<const double> r) {
  if (r.size() != head.weight.cols()) throw InvalidInput("classify: dimension mismatch");
  Vec logits(head.num_classes());
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = dot(head.weight.row(c), r) + head.bias[c];
  return logits;
}

Matrix project_rows(const ProjectionHead& head, const Matrix& x, Matrix* pre) {
  Matrix out(x.rows(), head.d_proj());
  if (pre) *pre = Matrix(x.rows(), head.d_proj());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    if (xi.size() != head.d_in()) throw InvalidInput("project: dimension mismatch");
    auto ri = out.row(i);
    for (std::size_t k = 0; k < ri.size(); ++k) {
      const double z = dot(head.weight.row(k), xi) + head.bias[k];
      if (pre) (*pre)(i, k) = z;
      ri[k] = head.activation == Activation::Tanh ? std::tanh(z) : z;
    }
  }
  return out;
}

void TrainConfig::check() const {
  if (epochs < 0) throw InvalidInput("train.epochs must be >= 0");
  if (K < 1) throw InvalidInput("train.K must be >= 1");
  if (M < 1) throw InvalidInput("train.M must be >= 1");
  if (D < 0) throw InvalidInput("train.D must be >= 0 (0 selects the automatic size)");
  if (d_proj < 1) throw InvalidInput("train.d_proj must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidInput("train.learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("train.momentum must lie in [0, 1)");
  if (eval_every < 1) throw InvalidInput("train.eval_every must be >= 1");
  if (kmeans_iters < 1) throw InvalidInput("train.kmeans_iters must be >= 1");
  if (warmup_epochs < -1) throw InvalidInput("train.warmup_epochs must be >= 0 (or -1 for automatic)");
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig t;
  auto as_int = [&](const char* key, int fallback) { return static_cast<int>(cfg.get_int(key, fallback)); };
  t.epochs = as_int("train.epochs", t.epochs);
  t.K = as_int("train.K", t.K);
  t.M = as_int("train.M", t.M);
  t.D = as_int("train.D", t.D);
  t.d_proj = as_int("train.d_proj", t.d_proj);
  t.activation = parse_activation(cfg.get_string("train.activation", to_string(t.activation)));
  const std::string opt = cfg.get_string("train.optimizer", "sgd-momentum");
  if (opt == "sgd") t.optimizer = OptimizerKind::Sgd;
  else if (opt == "sgd-momentum") t.optimizer = OptimizerKind::SgdMomentum;
  else throw InvalidInput("unknown optimizer '" + opt + "' (sgd, sgd-momentum)");
  t.momentum = cfg.get_double("train.momentum", t.momentum);
  t.learning_rate = cfg.get_double("train.learning_rate", t.learning_rate);
  const auto seed = cfg.get_int("train.seed", static_cast<std::int64_t>(t.seed));
  if (seed < 0) throw InvalidInput("train.seed must be non-negative");
  t.seed = static_cast<std::uint64_t>(seed);
  t.eval_every = as_int("train.eval_every", t.eval_every);
  t.warmup_epochs = as_int("train.warmup_epochs", t.warmup_epochs);
  t.kmeans_iters = as_int("train.kmeans_iters", t.kmeans_iters);
  t.minority_class = as_int("train.minority_class", t.minority_class);

  auto& o = t.objective;
  o.variant = parse_variant(cfg.get_string("objective.variant", to_string(o.variant)));
  o.alpha = cfg.get_double("objective.alpha", o.alpha);
  o.gamma = cfg.get_double("objective.gamma", o.gamma);
  o.beta = cfg.get_double("objective.beta", o.beta);
  o.epsilon = cfg.get_double("objective.epsilon", o.epsilon);
  o.class_weights = cfg.get_doubles("objective.class_weights", o.class_weights);
  t.check();
  return t;
}

std::vector<std::pair<std::string, std::string>> describe(const TrainConfig& cfg) {
  auto num = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::string weights;
  for (std::size_t i = 0; i < cfg.objective.class_weights.size(); ++i)
    weights += (i ? "," : "") + num(cfg.objective.class_weights[i]);
  return {
      {"train.epochs", std::to_string(cfg.epochs)},
      {"train.K", std::to_string(cfg.K)},
      {"train.M", std::to_string(cfg.M)},
      {"train.D", std::to_string(cfg.D)},
      {"train.d_proj", std::to_string(cfg.d_proj)},
      {"train.activation", to_string(cfg.activation)},
      {"train.optimizer", cfg.optimizer == OptimizerKind::Sgd ? "sgd" : "sgd-momentum"},
      {"train.momentum", num(cfg.momentum)},
      {"train.learning_rate", num(cfg.learning_rate)},
      {"train.seed", std::to_string(cfg.seed)},
      {"train.eval_every", std::to_string(cfg.eval_every)},
      {"train.warmup_epochs", std::to_string(cfg.warmup_epochs)},
      {"train.kmeans_iters", std::to_string(cfg.kmeans_iters)},
      {"train.minority_class", std::to_string(cfg.minority_class)},
      {"objective.variant", to_string(cfg.objective.variant)},
      {"objective.alpha", num(cfg.objective.alpha)},
      {"objective.gamma", num(cfg.objective.gamma)},
      {"objective.beta", num(cfg.objective.beta)},
      {"objective.epsilon", num(cfg.objective.epsilon)},
      {"objective.class_weights", weights},
  };
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double momentum)
    : kind_(kind), lr_(learning_rate), momentum_(momentum) {}

void Optimizer::step(std::vector<double>& params, std::span<const double> grad) {
  if (grad.size() != params.size()) throw InvalidInput("optimizer: gradient size mismatch");
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
    return;
  }
  if (velocity_.size() != params.size()) velocity_.assign(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + grad[i];
    params[i] -= lr_ * velocity_[i];
  }
}

BatchInputs gather_batch(const NeighborhoodBatch& batch, const Dataset& train) {
  BatchInputs in;
  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    in.group_class.push_back(batch.groups[g].ref.cls);
    for (std::size_t m : batch.groups[g].members) {
      const auto& s = train.samples[m];
      in.x.append_row(s.vector);
      in.labels.push_back(s.label);
      in.group.push_back(g);
    }
  }
  std::vector<std::size_t> offset(batch.groups.size(), 0);
  for (std::size_t g = 1; g < batch.groups.size(); ++g) offset[g] = offset[g - 1] + batch.groups[g - 1].members.size();
  for (const auto& [g, k] : batch.implied) {
    const auto& s = train.samples[batch.groups[g].members[k]];
    in.x_implied.append_row(*s.implied);
    in.implied_owner.push_back(offset[g] + k);
  }
  if (in.x_implied.rows() == 0) in.x_implied = Matrix(0, train.d_in);
  return in;
}

namespace {

// dR -> dZ through the activation, then into dW (d_proj x d_in) and db.
void backprop_projection(const Matrix& dR, const Matrix& R, const Matrix& X, Activation act,
                         std::span<double> dW, std::span<double> db) {
  const std::size_t P = R.cols();
  const std::size_t din = X.cols();
  for (std::size_t i = 0; i < R.rows(); ++i) {
    const auto xi = X.row(i);
    for (std::size_t k = 0; k < P; ++k) {
      double dz = dR(i, k);
      if (act == Activation::Tanh) dz *= 1.0 - R(i, k) * R(i, k);
      if (dz == 0.0) continue;
      db[k] += dz;
      double* w = dW.data() + k * din;
      for (std::size_t j = 0; j < din; ++j) w[j] += dz * xi[j];
    }
  }
}

}  // namespace

StepResult batch_objective(const Params& params, const BatchInputs& batch, const ObjectiveConfig& cfg) {
  const auto& proj = params.projection;
  const auto& cls = params.classifier;
  const std::size_t T = batch.x.rows();
  const std::size_t P = proj.d_proj();
  const std::size_t din = proj.d_in();
  const std::size_t C = cls.num_classes();
  const std::size_t nW = P * din, nb = P, nV = C * P;

  const Matrix R = project_rows(proj, batch.x);
  Matrix logits(T, C);
  for (std::size_t i = 0; i < T; ++i) {
    const Vec z = classify(cls, R.row(i));
    std::copy(z.begin(), z.end(), logits.row(i).begin());
  }

  StepResult out;
  const LossGrad ce = ace_loss(logits, batch.labels, cfg.class_weights);
  ScalarGrad ce_g{ce.loss, std::vector<double>(params.size(), 0.0)};
  {
    std::span<double> g(ce_g.grad);
    auto dW = g.subspan(0, nW);
    auto db = g.subspan(nW, nb);
    auto dV = g.subspan(nW + nb, nV);
    auto dc = g.subspan(nW + nb + nV, C);
    Matrix dR(T, P);
    for (std::size_t i = 0; i < T; ++i) {
      const auto gl = ce.grad.row(i);
      const auto ri = R.row(i);
      auto dri = dR.row(i);
      for (std::size_t c = 0; c < C; ++c) {
        dc[c] += gl[c];
        const auto vc = cls.weight.row(c);
        for (std::size_t k = 0; k < P; ++k) {
          dV[c * P + k] += gl[c] * ri[k];
          dri[k] += gl[c] * vc[k];
        }
      }
    }
    backprop_projection(dR, R, batch.x, proj.activation, dW, db);
  }
  out.ce = ce.loss;

  if (cfg.variant == Variant::AceOnly) {
    out.total = std::move(ce_g);
    out.per_point_add.assign(T, 0.0);
    return out;
  }

  PointBatch pb;
  pb.points = R;
  pb.group = batch.group;
  pb.group_class = batch.group_class;
  pb.implied = project_rows(proj, batch.x_implied);
  pb.implied_owner = batch.implied_owner;
  const BatchStats stats = batch_stats(pb);
  const AddLoss add = add_loss(pb, stats, cfg);

  ScalarGrad add_g{add.loss, std::vector<double>(params.size(), 0.0)};
  {
    std::span<double> g(add_g.grad);
    backprop_projection(add.grad_points, pb.points, batch.x, proj.activation, g.subspan(0, nW), g.subspan(nW, nb));
    if (pb.implied.rows() > 0)
      backprop_projection(add.grad_implied, pb.implied, batch.x_implied, proj.activation, g.subspan(0, nW),
                          g.subspan(nW, nb));
  }
  out.add = add.loss;
  out.per_point_add = add.per_point;
  out.total = combined_loss(ce_g, add_g, cfg.beta);
  return out;
}

int predict(const Model& model, std::span<const double> x) {
  const Vec logits = classify(model.params.classifier, project(model.params.projection, x));
  int best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

std::vector<int> predict_all(const Model& model, const Dataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) out.push_back(predict(model, s.vector));
  return out;
}

int predict_nearest_cluster(const Model& model, const ClusterIndex& index, std::span<const double> x) {
  return nearest_cluster_class(index, project(model.params.projection, x));
}

Evaluation evaluate(const Model& model, const Dataset& ds, InferenceMode mode, const std::optional<LabelMerge>& merge) {
  if (ds.d_in != model.params.projection.d_in())
    throw InvalidInput("dataset dimension " + std::to_string(ds.d_in) + " does not match model input dimension " +
                       std::to_string(model.params.projection.d_in()));
  if (static_cast<std::size_t>(ds.num_classes()) != model.params.classifier.num_classes())
    throw InvalidInput("dataset declares " + std::to_string(ds.num_classes()) + " classes, model has " +
                       std::to_string(model.params.classifier.num_classes()));
  Evaluation ev;
  std::vector<int> labels;
  for (const auto& s : ds.samples) {
    labels.push_back(s.label);
    ev.predictions.push_back(mode == InferenceMode::Classifier ? predict(model, s.vector)
                                                               : predict_nearest_cluster(model, model.index, s.vector));
  }
  ev.metrics = score(labels, ev.predictions, ds.class_names);
  if (merge) ev.merged = score_merged(labels, ev.predictions, *merge);
  return ev;
}

namespace {

Matrix stack_vectors(const Dataset& ds) {
  Matrix x(ds.size(), ds.d_in);
  for (std::size_t i = 0; i < ds.size(); ++i)
    std::copy(ds.samples[i].vector.begin(), ds.samples[i].vector.end(), x.row(i).begin());
  return x;
}

bool all_finite(const ScalarGrad& g) {
  if (!std::isfinite(g.value)) return false;
  return std::all_of(g.grad.begin(), g.grad.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

TrainedModel train(const SplitPair& data, const TrainConfig& cfg) {
  cfg.check();
  const Dataset& tr = data.train;
  const int C = tr.num_classes();
  if (tr.size() == 0) throw InvalidInput("train: empty training split");
  if (C < 2) throw InvalidInput("train: at least two classes are required");
  const auto counts = tr.class_counts();
  for (int c = 0; c < C; ++c)
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw InvalidInput("train: class " + std::to_string(c) + " (" + tr.class_names[static_cast<std::size_t>(c)] +
                         ") has no training samples");
  if (data.test.d_in != tr.d_in) throw InvalidInput("train: train and test dimensions differ");

  ObjectiveConfig objective = cfg.objective;
  if (objective.class_weights.empty()) objective.class_weights = inverse_frequency_weights(counts);
  objective.check(C);
  const bool ace_only = objective.variant == Variant::AceOnly;

  TrainedModel out;
  out.class_names = tr.class_names;
  out.implicit_labels = tr.implicit_labels;
  out.d_in = tr.d_in;
  out.config = cfg;
  out.config.objective.class_weights = objective.class_weights;
  out.minority_class = cfg.minority_class >= 0 ? cfg.minority_class
                       : !tr.implicit_labels.empty() ? *tr.implicit_labels.begin()
                                                     : 1;
  if (out.minority_class >= C) throw InvalidInput("train.minority_class out of range");

  Params params = init_params(tr.d_in, static_cast<std::size_t>(cfg.d_proj), C, cfg.activation, mix_seed(cfg.seed, 1));
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.momentum);
  Rng rng(mix_seed(cfg.seed, 2));

  const Matrix X = stack_vectors(tr);
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (const auto& s : tr.samples) {
    ids.push_back(s.id);
    labels.push_back(s.label);
  }
  const std::size_t batch_points = static_cast<std::size_t>((cfg.M + 1) * cfg.nominal_D());
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, tr.size() / batch_points);
  const int warmup = cfg.effective_warmup();

  out.best_macro_f1 = -1.0;
  out.highest_minority_f1 = -1.0;
  auto record = [&](int epoch, double ce, double add) {
    const Evaluation ev = evaluate(Model{params, {}}, data.test);
    HistoryRecord h;
    h.epoch = epoch;
    for (const auto& c : ev.metrics.classes) h.class_f1.push_back(c.f1);
    h.macro_f1 = ev.metrics.macro_f1;
    h.ce_loss = ce;
    h.add_loss = add;
    if (h.macro_f1 > out.best_macro_f1) {
      out.best_macro_f1 = h.macro_f1;
      out.best_epoch = epoch;
      out.best.params = params;
    }
    const double minority_f1 = h.class_f1[static_cast<std::size_t>(out.minority_class)];
    if (minority_f1 > out.highest_minority_f1) {
      out.highest_minority_f1 = minority_f1;
      out.highest_minority_epoch = epoch;
    }
    out.history.push_back(std::move(h));
  };

  if (cfg.epochs == 0) record(0, 0.0, 0.0);

  ClusterIndex index;
  std::vector<std::size_t> order(tr.size());
  int epochs_done = 0;
  double last_ce = 0.0, last_add = 0.0;
  for (int epoch = 0; epoch < cfg.epochs && !out.diverged; ++epoch) {
    const Params epoch_start = params;
    if (!ace_only) {
      const Matrix R = project_rows(params.projection, X);
      index = build_index(ids, R, labels, C, cfg.K, cfg.kmeans_iters, mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)),
                          static_cast<std::uint64_t>(epoch) + 1);
      ++out.stats.index_builds;
    } else {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
    }

    double ce_sum = 0.0, add_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      BatchInputs inputs;
      NeighborhoodBatch nb;
      if (ace_only) {
        const std::size_t lo = step * batch_points;
        const std::size_t hi = std::min(order.size(), lo + batch_points);
        inputs.group_class = {0};
        for (std::size_t k = lo; k < hi; ++k) {
          inputs.x.append_row(tr.samples[order[k]].vector);
          inputs.labels.push_back(tr.samples[order[k]].label);
          inputs.group.push_back(0);
        }
        inputs.x_implied = Matrix(0, tr.d_in);
      } else {
        const ClusterRef seed = select_seed(index, epoch, warmup, rng);
        int eligible = 0;
        for (const auto& c : index.clusters) eligible += c.ref.cls != seed.cls;
        const auto imposters = select_imposters(index, seed, std::min(cfg.M, eligible));
        int D = cfg.D;
        if (D == 0) {
          std::size_t smallest = index.at(seed).members.size();
          for (auto ref : imposters) smallest = std::min(smallest, index.at(ref).members.size());
          D = static_cast<int>(std::clamp<std::size_t>(smallest, 2, 8));
        }
        nb = sample_batch(index, seed, imposters, D, rng, tr);
        ++out.stats.sampled_batches;
        inputs = gather_batch(nb, tr);
      }

      const StepResult res = batch_objective(params, inputs, objective);
      if (!all_finite(res.total)) {
        out.diverged = true;
        out.divergence = "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step);
        break;
      }
      std::vector<double> flat = params.flatten();
      opt.step(flat, res.total.grad);
      params.assign(flat);
      ++out.stats.steps;
      ++steps;
      ce_sum += res.ce;
      add_sum += res.add;

      if (!ace_only) record_batch_losses(index, nb, res.per_point_add);
    }
    // Finite parameters can still overflow once projected (clustering sums
    // squared distances); such an epoch is discarded so the kept model always
    // has a usable index.
    if (!out.diverged) {
      const Matrix R = project_rows(params.projection, X);
      double energy = 0.0;
      for (double v : R.data()) energy += 4.0 * v * v;
      if (!std::isfinite(energy)) {
        out.diverged = true;
        out.divergence = "non-finite projections after epoch " + std::to_string(epoch);
      }
    }
    if (out.diverged) {
      params = epoch_start;
      break;
    }
    ++epochs_done;
    last_ce = steps ? ce_sum / static_cast<double>(steps) : 0.0;
    last_add = steps ? add_sum / static_cast<double>(steps) : 0.0;
    if (epochs_done % cfg.eval_every == 0 || epochs_done == cfg.epochs) record(epochs_done, last_ce, last_add);
  }
  if (out.diverged && (out.history.empty() || out.history.back().epoch != epochs_done))
    record(epochs_done, last_ce, last_add);

  out.final_model.params = params;
  auto index_for = [&](const Params& p, std::uint64_t salt) {
    const Matrix R = project_rows(p.projection, X);
    return build_index(ids, R, labels, C, cfg.K, cfg.kmeans_iters, mix_seed(cfg.seed, salt),
                       static_cast<std::uint64_t>(epochs_done) + 1);
  };
  out.final_model.index = index_for(out.final_model.params, 3);
  out.best.index = index_for(out.best.params, 4);
  return out;
}

}  // namespace fiadd
