#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "graphuil/evaluation.hpp"

namespace graphuil {

namespace {

struct Moments {
  double mean{0.0};
  double var{0.0};  // unbiased
  double n{0.0};
};

Moments moments(std::span<const double> xs) {
  Moments m;
  m.n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= m.n;
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= m.n - 1.0;
  return m;
}

}  // namespace

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t_test needs at least two values per sample");
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double sa = ma.var / ma.n;
  const double sb = mb.var / mb.n;
  TTestResult r;
  if (sa + sb == 0.0) {
    r.degenerate = true;
    r.df = ma.n + mb.n - 2.0;
    if (ma.mean == mb.mean) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma.mean > mb.mean ? INFINITY : -INFINITY;
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma.mean - mb.mean) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (ma.n - 1.0) + sb * sb / (mb.n - 1.0));
  // Two-sided tail of Student's t: I_{df/(df+t²)}(df/2, 1/2).
  const double x = r.df / (r.df + r.t * r.t);
  r.p = x >= 1.0 ? 1.0 : boost::math::ibeta(r.df / 2.0, 0.5, x);
  return r;
}

}  // namespace graphuil
