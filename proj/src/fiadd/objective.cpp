#include "fiadd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fiadd/error.hpp"

namespace fiadd {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Add: return "add";
    case Variant::AddFoc: return "add-foc";
    case Variant::AddInfFoc: return "add-inf-foc";
    case Variant::AceOnly: return "ace";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  std::string t;
  for (char ch : text) t.push_back(ch == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (t == "add") return Variant::Add;
  if (t == "add-foc") return Variant::AddFoc;
  if (t == "add-inf-foc") return Variant::AddInfFoc;
  if (t == "ace" || t == "ace-only") return Variant::AceOnly;
  throw InvalidInput("unknown objective variant '" + text + "' (add, add-foc, add-inf-foc, ace)");
}

void ObjectiveConfig::check(int num_classes) const {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(alpha) || alpha < 0.0) throw InvalidInput("objective.alpha must be a finite value >= 0");
  if (!finite(gamma) || gamma < 0.0) throw InvalidInput("objective.gamma must be a finite value >= 0");
  if (!finite(beta) || beta < 0.0 || beta > 1.0) throw InvalidInput("objective.beta must lie in [0, 1]");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw InvalidInput("objective.epsilon must lie in (0, 0.5)");
  if (!class_weights.empty()) {
    if (static_cast<int>(class_weights.size()) != num_classes)
      throw InvalidInput("objective.class_weights needs one entry per class");
    for (double w : class_weights)
      if (!finite(w) || w <= 0.0) throw InvalidInput("objective.class_weights must be positive");
  }
}

namespace {

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double log_p_inf(std::span<const double> r, std::span<const double> own,
                 std::optional<std::span<const double>> implied, double sigma2, double sigma2_tilde,
                 const std::vector<Vec>& imposters, double alpha) {
  if (imposters.empty()) throw InvalidInput("p_add needs at least one imposter mean");
  const double s = 1.0 / (2.0 * sigma2);
  const double a = -s * squared_l2(r, own) - alpha;
  double log_num = a;
  if (implied) {
    const double b = -squared_l2(r, *implied) / (2.0 * sigma2_tilde) - alpha;
    const double terms[2] = {a, b};
    log_num = log_sum_exp(terms);
  }
  std::vector<double> c;
  c.reserve(imposters.size());
  for (const auto& mu : imposters) c.push_back(-s * squared_l2(r, mu));
  return log_num - log_sum_exp(c);
}

}  // namespace

double p_add(std::span<const double> r, std::span<const double> own_mean,
             const std::vector<Vec>& imposter_means, double sigma2, double alpha) {
  return std::exp(log_p_inf(r, own_mean, std::nullopt, sigma2, sigma2, imposter_means, alpha));
}

double p_add_inf(std::span<const double> r, std::span<const double> own_mean,
                 std::optional<std::span<const double>> implied_mean, double sigma2,
                 double sigma2_tilde, const std::vector<Vec>& imposter_means, double alpha) {
  return std::exp(log_p_inf(r, own_mean, implied_mean, sigma2, sigma2_tilde, imposter_means, alpha));
}

BatchStats batch_stats(const PointBatch& batch) {
  const std::size_t T = batch.points.rows();
  const std::size_t d = batch.points.cols();
  const std::size_t G = batch.num_groups();
  if (T == 0 || G == 0) throw InvalidInput("batch_stats: empty batch");

  BatchStats st;
  st.mu = Matrix(G, d);
  std::vector<std::size_t> count(G, 0);
  for (std::size_t i = 0; i < T; ++i) {
    axpy(1.0, batch.points.row(i), st.mu.row(batch.group[i]));
    ++count[batch.group[i]];
  }
  for (std::size_t g = 0; g < G; ++g) {
    if (count[g] == 0) throw InvalidInput("batch_stats: group without points");
    for (double& x : st.mu.row(g)) x /= static_cast<double>(count[g]);
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < T; ++i) ss += squared_l2(batch.points.row(i), st.mu.row(batch.group[i]));
  st.sigma2 = T > 1 ? ss / static_cast<double>(T - 1) : 0.0;
  if (!(st.sigma2 >= kVarianceFloor)) {
    st.sigma2 = kVarianceFloor;
    st.sigma2_floored = true;
  }

  const std::size_t U = batch.implied.rows();
  st.has_implied.assign(G, 0);
  st.mu_tilde = Matrix(G, d);
  std::vector<std::size_t> icount(G, 0);
  for (std::size_t k = 0; k < U; ++k) {
    const std::size_t g = batch.group[batch.implied_owner[k]];
    axpy(1.0, batch.implied.row(k), st.mu_tilde.row(g));
    ++icount[g];
    st.has_implied[g] = 1;
  }
  bool thin = false;
  for (std::size_t g = 0; g < G; ++g) {
    if (!icount[g]) continue;
    for (double& x : st.mu_tilde.row(g)) x /= static_cast<double>(icount[g]);
    if (icount[g] < 2) thin = true;
  }
  if (U == 0 || thin) {
    st.sigma2_tilde = st.sigma2;
    st.sigma2_tilde_floored = st.sigma2_floored;
    st.tilde_fallback = true;
  } else {
    double tss = 0.0;
    for (std::size_t k = 0; k < U; ++k)
      tss += squared_l2(batch.implied.row(k), st.mu_tilde.row(batch.group[batch.implied_owner[k]]));
    st.sigma2_tilde = tss / static_cast<double>(U - 1);
    if (!(st.sigma2_tilde >= kVarianceFloor)) {
      st.sigma2_tilde = kVarianceFloor;
      st.sigma2_tilde_floored = true;
    }
  }
  return st;
}

AddLoss add_loss(const PointBatch& batch, const BatchStats& stats, const ObjectiveConfig& cfg) {
  const std::size_t T = batch.points.rows();
  const std::size_t d = batch.points.cols();
  const std::size_t G = batch.num_groups();
  const std::size_t U = batch.implied.rows();

  AddLoss out;
  out.grad_points = Matrix(T, d);
  out.grad_implied = Matrix(U, d);
  out.per_point.assign(T, 0.0);
  out.p.assign(T, 0.0);
  if (cfg.variant == Variant::AceOnly) return out;

  const bool focal = cfg.variant != Variant::Add;
  const bool inferential = cfg.variant == Variant::AddInfFoc;
  const double gamma = focal ? cfg.gamma : 0.0;
  const double s = 1.0 / (2.0 * stats.sigma2);
  const double st = 1.0 / (2.0 * stats.sigma2_tilde);
  const double log_lo = std::log(cfg.epsilon);
  const double log_hi = std::log1p(-cfg.epsilon);
  const double inv_T = 1.0 / static_cast<double>(T);

  // Upstream gradients on the batch statistics.
  Matrix g_mu(G, d);
  Matrix g_mu_tilde(G, d);
  double g_s = 0.0;
  double g_st = 0.0;

  std::vector<double> c;
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < T; ++i) {
    const auto r = batch.points.row(i);
    const std::size_t g = batch.group[i];
    const int cls = batch.group_class[g];
    const auto own = stats.mu.row(g);
    const bool inf_term = inferential && stats.has_implied[g];

    const double d_own = squared_l2(r, own);
    const double a = -s * d_own - cfg.alpha;
    double b = 0.0, d_tilde = 0.0, log_num = a;
    if (inf_term) {
      d_tilde = squared_l2(r, stats.mu_tilde.row(g));
      b = -st * d_tilde - cfg.alpha;
      const double terms[2] = {a, b};
      log_num = log_sum_exp(terms);
    }
    c.clear();
    others.clear();
    for (std::size_t h = 0; h < G; ++h) {
      if (batch.group_class[h] == cls) continue;
      others.push_back(h);
      c.push_back(-s * squared_l2(r, stats.mu.row(h)));
    }
    if (others.empty()) throw InvalidInput("add_loss: a batch point has no other-class cluster");
    const double log_den = log_sum_exp(c);
    const double log_p = log_num - log_den;
    out.p[i] = std::exp(log_p);

    double log_ph = log_p;
    bool clamped = false;
    if (log_p < log_lo) {
      log_ph = log_lo;
      clamped = true;
    } else if (log_p > log_hi) {
      log_ph = log_hi;
      clamped = true;
    }
    const double ph = clamped ? (log_p < log_lo ? cfg.epsilon : 1.0 - cfg.epsilon) : std::exp(log_ph);
    const double q = 1.0 - ph;
    const double focal_w = std::pow(q, gamma);
    out.per_point[i] = focal_w * -log_ph;
    out.loss += out.per_point[i];
    if (clamped) continue;

    // d loss_i / d log p
    double dl = -focal_w;
    if (gamma != 0.0) dl += gamma * ph * std::pow(q, gamma - 1.0) * log_ph;
    const double u = dl * inv_T;

    const double w_a = std::exp(a - log_num);
    const double w_b = inf_term ? std::exp(b - log_num) : 0.0;
    auto gr = out.grad_points.row(i);
    auto gm_own = g_mu.row(g);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = r[j] - own[j];
      gr[j] += u * w_a * (-2.0 * s * diff);
      gm_own[j] += u * w_a * (2.0 * s * diff);
    }
    g_s += u * w_a * -d_own;
    if (inf_term) {
      const auto mt = stats.mu_tilde.row(g);
      auto gmt = g_mu_tilde.row(g);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = r[j] - mt[j];
        gr[j] += u * w_b * (-2.0 * st * diff);
        gmt[j] += u * w_b * (2.0 * st * diff);
      }
      g_st += u * w_b * -d_tilde;
    }
    for (std::size_t k = 0; k < others.size(); ++k) {
      const std::size_t h = others[k];
      const double v = std::exp(c[k] - log_den);
      const auto mh = stats.mu.row(h);
      auto gmh = g_mu.row(h);
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = r[j] - mh[j];
        dist += diff * diff;
        gr[j] -= u * v * (-2.0 * s * diff);
        gmh[j] -= u * v * (2.0 * s * diff);
      }
      g_s -= u * v * -dist;
    }
  }
  out.loss *= inv_T;

  // s = 1 / (2 sigma2)  =>  ds/dsigma2 = -2 s^2
  if (stats.tilde_fallback) {
    g_s += g_st;
    g_st = 0.0;
  }
  const double g_sigma2 = stats.sigma2_floored ? 0.0 : g_s * -2.0 * s * s;
  const double g_sigma2_tilde = (stats.tilde_fallback || stats.sigma2_tilde_floored) ? 0.0 : g_st * -2.0 * st * st;

  std::vector<std::size_t> count(G, 0);
  for (std::size_t i = 0; i < T; ++i) ++count[batch.group[i]];
  const double var_scale = T > 1 ? 2.0 / static_cast<double>(T - 1) : 0.0;
  for (std::size_t i = 0; i < T; ++i) {
    const std::size_t g = batch.group[i];
    const auto r = batch.points.row(i);
    const auto mu = stats.mu.row(g);
    const auto gm = g_mu.row(g);
    auto gr = out.grad_points.row(i);
    const double inv_n = 1.0 / static_cast<double>(count[g]);
    for (std::size_t j = 0; j < d; ++j) gr[j] += gm[j] * inv_n + g_sigma2 * var_scale * (r[j] - mu[j]);
  }
  if (inferential && U > 0) {
    std::vector<std::size_t> icount(G, 0);
    for (std::size_t k = 0; k < U; ++k) ++icount[batch.group[batch.implied_owner[k]]];
    const double tvar_scale = U > 1 ? 2.0 / static_cast<double>(U - 1) : 0.0;
    for (std::size_t k = 0; k < U; ++k) {
      const std::size_t g = batch.group[batch.implied_owner[k]];
      const auto rt = batch.implied.row(k);
      const auto mt = stats.mu_tilde.row(g);
      const auto gmt = g_mu_tilde.row(g);
      auto gt = out.grad_implied.row(k);
      const double inv_n = 1.0 / static_cast<double>(icount[g]);
      for (std::size_t j = 0; j < d; ++j) gt[j] += gmt[j] * inv_n + g_sigma2_tilde * tvar_scale * (rt[j] - mt[j]);
    }
  }
  return out;
}

LossGrad ace_loss(const Matrix& logits, std::span<const int> labels, std::span<const double> class_weights) {
  const std::size_t n = logits.rows();
  const std::size_t C = logits.cols();
  if (labels.size() != n) throw InvalidInput("ace_loss: one label per logits row required");
  if (!class_weights.empty() && class_weights.size() != C)
    throw InvalidInput("ace_loss: class_weights size differs from the number of classes");

  std::vector<double> w(C, 1.0);
  if (!class_weights.empty()) {
    double mean = 0.0;
    for (double x : class_weights) mean += x;
    mean /= static_cast<double>(C);
    for (std::size_t c = 0; c < C; ++c) w[c] = class_weights[c] / mean;
  }

  LossGrad out;
  out.grad = Matrix(n, C);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    const auto y = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || y >= C) throw InvalidInput("ace_loss: label out of range");
    const double lse = log_sum_exp(z);
    out.loss += w[y] * (lse - z[y]);
    auto g = out.grad.row(i);
    for (std::size_t c = 0; c < C; ++c) g[c] = w[y] * inv_n * std::exp(z[c] - lse);
    g[y] -= w[y] * inv_n;
  }
  out.loss *= inv_n;
  return out;
}

std::vector<double> inverse_frequency_weights(std::span<const std::size_t> class_counts) {
  const std::size_t C = class_counts.size();
  std::vector<double> w(C, 1.0);
  if (C == 0) return w;
  double N = 0.0;
  for (auto n : class_counts) N += static_cast<double>(n);
  for (std::size_t c = 0; c < C; ++c)
    if (class_counts[c] > 0) w[c] = N / (static_cast<double>(C) * static_cast<double>(class_counts[c]));
  double mean = 0.0;
  for (double x : w) mean += x;
  mean /= static_cast<double>(C);
  for (double& x : w) x /= mean;
  return w;
}

ScalarGrad combined_loss(const ScalarGrad& ce, const ScalarGrad& add, double beta) {
  if (ce.grad.size() != add.grad.size()) throw InvalidInput("combined_loss: gradient sizes differ");
  ScalarGrad out;
  out.value = beta * ce.value + (1.0 - beta) * add.value;
  out.grad.resize(ce.grad.size());
  for (std::size_t i = 0; i < ce.grad.size(); ++i) out.grad[i] = beta * ce.grad[i] + (1.0 - beta) * add.grad[i];
  return out;
}

GradCheckResult grad_check(const GradFn& fn, std::span<const double> inputs, double step) {
  const ScalarGrad analytic = fn(inputs);
  if (analytic.grad.size() != inputs.size()) throw InvalidInput("grad_check: gradient size differs from input size");
  GradCheckResult out;
  std::vector<double> x(inputs.begin(), inputs.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = fn(x).value;
    x[i] = saved - step;
    const double down = fn(x).value;
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.grad[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    if (err > out.max_rel_error || !std::isfinite(err)) {
      out.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
      out.worst_index = i;
      out.analytic = a;
      out.numeric = numeric;
    }
  }
  return out;
}

}  // namespace fiadd
