#pragma once

// Plain scalar re-implementations used as test oracles. They follow the
// definitions literally (direct exponentials, explicit loops, no shared code
// with the engine) so that agreement means something.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

namespace oracle {

using V = std::vector<double>;

inline double sqdist(const V& a, const V& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); i++) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double manhattan(const V& a, const V& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); i++) s += std::fabs(a[i] - b[i]);
  return s;
}

inline double euclid(const V& a, const V& b) { return std::sqrt(sqdist(a, b)); }

inline V mean_of(const std::vector<V>& xs) {
  V m(xs[0].size(), 0.0);
  for (auto& x : xs)
    for (size_t i = 0; i < m.size(); i++) m[i] += x[i];
  for (auto& v : m) v /= xs.size();
  return m;
}

inline double p_add(const V& r, const V& own, const std::vector<V>& imps, double s2, double alpha) {
  double num = std::exp(-sqdist(r, own) / (2 * s2) - alpha);
  double den = 0;
  for (auto& m : imps) den += std::exp(-sqdist(r, m) / (2 * s2));
  return num / den;
}

inline double p_add_inf(const V& r, const V& own, const V* implied, double s2, double s2t,
                        const std::vector<V>& imps, double alpha) {
  double num = std::exp(-sqdist(r, own) / (2 * s2) - alpha);
  if (implied) num += std::exp(-sqdist(r, *implied) / (2 * s2t) - alpha);
  double den = 0;
  for (auto& m : imps) den += std::exp(-sqdist(r, m) / (2 * s2));
  return num / den;
}

// A neighbourhood batch in its most literal form.
struct Micro {
  std::vector<V> pts;
  std::vector<int> grp;   // group of each point
  std::vector<int> gcls;  // class of each group
  std::vector<V> imp;     // implied points
  std::vector<int> owner; // owning point of each implied point
};

inline std::vector<V> group_points(const Micro& m, int g) {
  std::vector<V> out;
  for (size_t i = 0; i < m.pts.size(); i++)
    if (m.grp[i] == g) out.push_back(m.pts[i]);
  return out;
}

inline std::vector<V> group_implied(const Micro& m, int g) {
  std::vector<V> out;
  for (size_t k = 0; k < m.imp.size(); k++)
    if (m.grp[m.owner[k]] == g) out.push_back(m.imp[k]);
  return out;
}

inline double sigma2(const Micro& m) {
  double ss = 0;
  for (size_t i = 0; i < m.pts.size(); i++) ss += sqdist(m.pts[i], mean_of(group_points(m, m.grp[i])));
  double v = ss / (m.pts.size() - 1);
  return v < 1e-12 ? 1e-12 : v;
}

// Falls back to sigma2 when there are no implied points or some group holds
// exactly one.
inline double sigma2_tilde(const Micro& m) {
  if (m.imp.empty()) return sigma2(m);
  for (size_t g = 0; g < m.gcls.size(); g++) {
    auto gi = group_implied(m, (int)g);
    if (gi.size() == 1) return sigma2(m);
  }
  double ss = 0;
  for (size_t k = 0; k < m.imp.size(); k++) ss += sqdist(m.imp[k], mean_of(group_implied(m, m.grp[m.owner[k]])));
  double v = ss / (m.imp.size() - 1);
  return v < 1e-12 ? 1e-12 : v;
}

// variant: 0 plain, 1 focal, 2 focal + implied
inline double add_loss(const Micro& m, int variant, double alpha, double gamma, double eps,
                       std::vector<double>* probs = nullptr) {
  const double s2 = sigma2(m), s2t = sigma2_tilde(m);
  const double g = variant == 0 ? 0.0 : gamma;
  double total = 0;
  for (size_t i = 0; i < m.pts.size(); i++) {
    const int own_g = m.grp[i];
    V own = mean_of(group_points(m, own_g));
    std::vector<V> imps;
    for (size_t h = 0; h < m.gcls.size(); h++)
      if (m.gcls[h] != m.gcls[own_g]) imps.push_back(mean_of(group_points(m, (int)h)));
    auto gi = group_implied(m, own_g);
    V tilde;
    const V* tp = nullptr;
    if (variant == 2 && !gi.empty()) {
      tilde = mean_of(gi);
      tp = &tilde;
    }
    double p = p_add_inf(m.pts[i], own, tp, s2, s2t, imps, alpha);
    if (probs) probs->push_back(p);
    p = std::min(std::max(p, eps), 1 - eps);
    total += std::pow(1 - p, g) * -std::log(p);
  }
  return total / m.pts.size();
}

// Groups given as parallel vectors of points and group ids.
inline double ald(const std::vector<V>& pts, const std::vector<int>& grp, int a, int b,
                  double (*dist)(const V&, const V&)) {
  double s = 0;
  int n = 0;
  for (size_t i = 0; i < pts.size(); i++)
    for (size_t j = 0; j < pts.size(); j++)
      if (grp[i] == a && grp[j] == b) {
        s += dist(pts[i], pts[j]);
        n++;
      }
  return s / n;
}

inline double acld_mean(const std::vector<V>& pts, const std::vector<int>& grp, int a, int b,
                        double (*dist)(const V&, const V&)) {
  std::vector<V> A, B;
  for (size_t i = 0; i < pts.size(); i++) {
    if (grp[i] == a) A.push_back(pts[i]);
    if (grp[i] == b) B.push_back(pts[i]);
  }
  return dist(mean_of(A), mean_of(B));
}

inline double silhouette(const std::vector<V>& pts, const std::vector<int>& grp, double (*dist)(const V&, const V&)) {
  std::set<int> groups(grp.begin(), grp.end());
  double total = 0;
  for (size_t i = 0; i < pts.size(); i++) {
    double own = 0;
    int n_own = 0;
    for (size_t j = 0; j < pts.size(); j++)
      if (j != i && grp[j] == grp[i]) {
        own += dist(pts[i], pts[j]);
        n_own++;
      }
    if (n_own == 0) continue;
    double a = own / n_own;
    double b = 1e300;
    for (int g : groups) {
      if (g == grp[i]) continue;
      double s = 0;
      int n = 0;
      for (size_t j = 0; j < pts.size(); j++)
        if (grp[j] == g) {
          s += dist(pts[i], pts[j]);
          n++;
        }
      b = std::min(b, s / n);
    }
    double mx = std::max(a, b);
    if (mx > 0) total += (b - a) / mx;
  }
  return total / pts.size();
}

// Macro F1 from precision and recall per class (0 when undefined).
inline double macro_f1(const std::vector<int>& y, const std::vector<int>& p, int C) {
  double sum = 0;
  for (int c = 0; c < C; c++) {
    double tp = 0, pred = 0, act = 0;
    for (size_t i = 0; i < y.size(); i++) {
      if (p[i] == c) pred++;
      if (y[i] == c) act++;
      if (p[i] == c && y[i] == c) tp++;
    }
    double prec = pred > 0 ? tp / pred : 0;
    double rec = act > 0 ? tp / act : 0;
    sum += (prec + rec) > 0 ? 2 * prec * rec / (prec + rec) : 0;
  }
  return sum / C;
}

}  // namespace oracle
