#include <algorithm>
#include <cmath>
#include <string>

#include "bpl/errors.hpp"
#include "bpl/transport.hpp"

namespace bpl {

namespace {

void require_1d(const TorusGrid& g, const char* where) {
  if (g.d() != 1) fail(ErrorKind::DimensionError, std::string(where) + " needs d = 1");
}

// Adds `mass` spread uniformly over [ya, yb] into n cells of [0,1).
void deposit(std::vector<double>& cell_mass, double mass, double ya, double yb, bool torus) {
  const int n = int(cell_mass.size());
  auto slot = [&](long c) -> double& {
    if (torus) return cell_mass[((c % n) + n) % n];
    return cell_mass[std::clamp<long>(c, 0, n - 1)];
  };
  const double len = yb - ya;
  if (!(len > 1e-15)) {
    slot(long(std::floor(ya * n))) += mass;
    return;
  }
  long c = long(std::floor(ya * n));
  const long last = long(std::ceil(yb * n)) - 1;
  for (; c <= last; ++c) {
    double lo = std::max(ya, double(c) / n), hi = std::min(yb, double(c + 1) / n);
    if (hi > lo) slot(c) += mass * (hi - lo) / len;
  }
}

// Break points of a and of b(· + α) inside [0,1], sorted.
std::vector<double> merged_breaks(const PiecewiseQuantile& qa, const PiecewiseQuantile& qb, double alpha) {
  std::vector<double> s = qa.breaks();
  for (double b : qb.breaks()) {
    for (int k = -2; k <= 2; ++k) {
      double t = b - alpha + k;
      if (t > 0.0 && t < 1.0) s.push_back(t);
    }
  }
  s.push_back(0.0);
  s.push_back(1.0);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

PiecewiseQuantile::PiecewiseQuantile(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) fail(ErrorKind::InvalidArgument, "quantile needs at least one piece");
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const auto& p = pieces_[k];
    if (!(p.s1 > p.s0) || p.x1 < p.x0) fail(ErrorKind::InvalidArgument, "malformed quantile piece");
    if (k > 0 && (p.s0 != pieces_[k - 1].s1 || p.x0 < pieces_[k - 1].x1))
      fail(ErrorKind::InvalidArgument, "quantile pieces must tile [0,1] and be nondecreasing");
  }
  if (pieces_.front().s0 != 0.0 || pieces_.back().s1 != 1.0)
    fail(ErrorKind::InvalidArgument, "quantile pieces must cover [0,1]");
}

PiecewiseQuantile PiecewiseQuantile::from_density(const DensityField& rho) {
  require_1d(rho.grid(), "quantile");
  const int n = rho.grid().n();
  const double h = rho.grid().h();
  std::vector<double> cum(n + 1, 0.0);
  for (int i = 0; i < n; ++i) cum[i + 1] = cum[i] + rho[i] * h;
  const double total = cum[n];
  std::vector<Piece> pieces;
  double s_prev = 0.0;
  int last_pos = -1;
  for (int i = 0; i < n; ++i)
    if (rho[i] > 0.0) last_pos = i;
  for (int i = 0; i < n; ++i) {
    if (!(rho[i] > 0.0)) continue;
    double s1 = i == last_pos ? 1.0 : cum[i + 1] / total;
    if (s1 <= s_prev) continue;  // mass below rounding
    pieces.push_back({s_prev, s1, i * h, (i + 1) * h});
    s_prev = s1;
  }
  return PiecewiseQuantile(std::move(pieces));
}

double PiecewiseQuantile::operator()(double s) const {
  const double k = std::floor(s);
  double r = s - k;
  if (r == 0.0 && k != 0.0) {  // left limit at an integer
    r = 1.0;
    return (*this)(r) + (k - 1.0);
  }
  auto it = std::lower_bound(pieces_.begin(), pieces_.end(), r, [](const Piece& p, double v) { return p.s1 < v; });
  if (it == pieces_.end()) it = pieces_.end() - 1;
  const Piece& p = *it;
  return p.x0 + (p.x1 - p.x0) * (r - p.s0) / (p.s1 - p.s0) + k;
}

double PiecewiseQuantile::cdf(double x) const {
  const double x0 = pieces_.front().x0;
  const double k = std::floor(x - x0);
  const double y = x - k;
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), y, [](double v, const Piece& p) { return v < p.x1; });
  if (it == pieces_.end()) return 1.0 + k;
  const Piece& p = *it;
  if (y <= p.x0) return p.s0 + k;
  return p.s0 + (p.s1 - p.s0) * (y - p.x0) / (p.x1 - p.x0) + k;
}

std::vector<double> PiecewiseQuantile::breaks() const {
  std::vector<double> b;
  b.reserve(pieces_.size() + 1);
  for (const auto& p : pieces_) b.push_back(p.s0);
  b.push_back(1.0);
  return b;
}

MonotoneMap1D::MonotoneMap1D(DensityField source, DensityField target, std::vector<double> values, TransportMode mode,
                             double cut)
    : source_(std::move(source)), target_(std::move(target)), values_(std::move(values)), mode_(mode), cut_(cut) {
  if (values_.size() != source_.size()) fail(ErrorKind::InvalidArgument, "map needs one value per source cell");
}

double cut_cost(const PiecewiseQuantile& qa, const PiecewiseQuantile& qb, double alpha) {
  // Two-point Gauss–Legendre is exact for the quadratic integrand on each sub-interval.
  static const double g = 1.0 / std::sqrt(3.0);
  const auto s = merged_breaks(qa, qb, alpha);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double c = 0.5 * (s[k] + s[k + 1]), d = 0.5 * (s[k + 1] - s[k]);
    if (!(d > 0.0)) continue;
    const double u1 = c - g * d, u2 = c + g * d;
    const double f1 = qa(u1) - qb(u1 + alpha), f2 = qa(u2) - qb(u2 + alpha);
    total += d * (f1 * f1 + f2 * f2);
  }
  return total;
}

double optimal_cut(const PiecewiseQuantile& qa, const PiecewiseQuantile& qb) {
  static const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -1.0, b = 1.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = cut_cost(qa, qb, c), fd = cut_cost(qa, qb, d);
  while (b - a > 1e-10) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = cut_cost(qa, qb, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = cut_cost(qa, qb, d);
    }
  }
  return 0.5 * (a + b);
}

QuantileDistance w2_quantile(const PiecewiseQuantile& qa, const PiecewiseQuantile& qb, TransportMode mode) {
  QuantileDistance out;
  out.cut = mode == TransportMode::Torus ? optimal_cut(qa, qb) : 0.0;
  out.distance = std::sqrt(std::max(0.0, cut_cost(qa, qb, out.cut)));
  return out;
}

W2Result w2_1d(const DensityField& rho, const DensityField& eta, TransportMode mode) {
  require_1d(rho.grid(), "w2_1d");
  require_1d(eta.grid(), "w2_1d");
  if (rho.grid().n() != eta.grid().n()) fail(ErrorKind::InvalidArgument, "w2_1d: densities on different grids");
  const auto qa = PiecewiseQuantile::from_density(rho);
  const auto qb = PiecewiseQuantile::from_density(eta);
  const auto qd = w2_quantile(qa, qb, mode);

  std::vector<double> t(rho.size());
  for (int i = 0; i < rho.grid().n(); ++i) {
    double s = qa.cdf(rho.grid().center(i));
    if (mode == TransportMode::Interval) s = std::clamp(s, 0.0, 1.0);
    t[i] = qb(s + qd.cut);
  }
  return W2Result{qd.distance, qd.distance * qd.distance, MonotoneMap1D(rho, eta, std::move(t), mode, qd.cut)};
}

PiecewiseQuantile geodesic_quantile(const DensityField& rho, const DensityField& eta, double t, TransportMode mode) {
  const auto qa = PiecewiseQuantile::from_density(rho);
  const auto qb = PiecewiseQuantile::from_density(eta);
  const double alpha = mode == TransportMode::Torus ? optimal_cut(qa, qb) : 0.0;
  const auto s = merged_breaks(qa, qb, alpha);
  std::vector<PiecewiseQuantile::Piece> pieces;
  auto qt = [&](double u) { return (1.0 - t) * qa(u) + t * qb(u + alpha); };
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double w = s[k + 1] - s[k];
    if (!(w > 0.0)) continue;
    // Interior samples avoid the jump ambiguity at the ends; the piece is linear.
    const double y1 = qt(s[k] + 0.25 * w), y2 = qt(s[k] + 0.75 * w);
    double x0 = y1 - 0.5 * (y2 - y1), x1 = y2 + 0.5 * (y2 - y1);
    if (!pieces.empty()) x0 = std::max(x0, pieces.back().x1);
    x1 = std::max(x1, x0);
    pieces.push_back({pieces.empty() ? 0.0 : pieces.back().s1, s[k + 1], x0, x1});
  }
  pieces.back().s1 = 1.0;
  return PiecewiseQuantile(std::move(pieces));
}

DensityField quantile_to_density(const PiecewiseQuantile& q, const TorusGrid& grid, TransportMode mode) {
  require_1d(grid, "quantile_to_density");
  std::vector<double> m(grid.n(), 0.0);
  for (const auto& p : q.pieces()) deposit(m, p.s1 - p.s0, p.x0, p.x1, mode == TransportMode::Torus);
  for (double& v : m) v /= grid.h();
  return normalize(std::move(m), grid);
}

DensityField geodesic(const DensityField& rho, const DensityField& eta, double t, TransportMode mode) {
  require_1d(rho.grid(), "geodesic");
  if (t <= 0.0) return rho;
  if (t >= 1.0) return eta;
  return quantile_to_density(geodesic_quantile(rho, eta, t, mode), rho.grid(), mode);
}

// ---- particles ----

double Quantile1D::at(long k) const {
  const long m = long(q.size());
  if (mode == TransportMode::Interval) return q[std::clamp<long>(k, 0, m - 1)];
  long j = ((k % m) + m) % m;
  return q[j] + double((k - j) / m);
}

double Quantile1D::value(double s) const {
  const double m = double(q.size());
  double u = s * m - 0.5;
  if (mode == TransportMode::Interval) u = std::clamp(u, 0.0, m - 1.0);
  const double k = std::floor(u), f = u - k;
  return (1.0 - f) * at(long(k)) + f * at(long(k) + 1);
}

double Quantile1D::cdf(double x) const {
  const long m = long(q.size());
  if (mode == TransportMode::Interval) {
    if (x <= q.front()) return 0.0;
    if (x >= q.back()) return 1.0;
  }
  const double shift = mode == TransportMode::Torus ? std::floor(x - q.front()) : 0.0;
  const double y = x - shift;
  long k = long(std::upper_bound(q.begin(), q.end(), y) - q.begin()) - 1;
  k = std::clamp<long>(k, 0, m - 1);
  const double lo = at(k), hi = at(k + 1);
  const double frac = hi > lo ? std::clamp((y - lo) / (hi - lo), 0.0, 1.0) : 0.0;
  return (double(k) + 0.5 + frac) / double(m) + shift;
}

Quantile1D quantiles(const DensityField& rho, std::size_t m, TransportMode mode) {
  if (m < 2) fail(ErrorKind::InvalidArgument, "quantile lattice needs m >= 2");
  const auto Q = PiecewiseQuantile::from_density(rho);
  Quantile1D out;
  out.mode = mode;
  out.q.resize(m);
  for (std::size_t k = 0; k < m; ++k) out.q[k] = Q((k + 0.5) / double(m));
  return out;
}

DensityField to_density(const Quantile1D& q, const TorusGrid& grid) {
  require_1d(grid, "to_density");
  const long m = long(q.m());
  const bool torus = q.mode == TransportMode::Torus;
  std::vector<double> cm(grid.n(), 0.0);
  for (long k = 0; k < (torus ? m : m - 1); ++k) deposit(cm, 1.0 / m, q.at(k), q.at(k + 1), torus);
  if (!torus) {
    deposit(cm, 0.5 / m, q.at(0), q.at(0), false);
    deposit(cm, 0.5 / m, q.at(m - 1), q.at(m - 1), false);
  }
  for (double& v : cm) v /= grid.h();
  return normalize(std::move(cm), grid);
}

ParticleMatch match_particles(const Quantile1D& p, const Quantile1D& q) {
  if (p.m() != q.m()) fail(ErrorKind::InvalidArgument, "particle sets differ in size");
  const long m = long(p.m());
  auto cost = [&](long j) {
    double s = 0.0;
    for (long k = 0; k < m; ++k) {
      double d = q.at(k + j) - p.q[k];
      s += d * d;
    }
    return s / double(m);
  };
  if (p.mode == TransportMode::Interval) return {cost(0), 0};
  double mp = 0.0, mq = 0.0;
  for (long k = 0; k < m; ++k) {
    mp += p.q[k];
    mq += q.q[k];
  }
  // Mean of q_{k+j} grows by 1/m per unit shift; start where the mean displacement vanishes.
  long j = std::lround(double(m) * (mp - mq) / double(m));
  double c = cost(j);
  for (int dir : {-1, 1}) {
    for (;;) {
      double cn = cost(j + dir);
      if (cn < c) {
        c = cn;
        j += dir;
      } else {
        break;
      }
    }
  }
  return {c, j};
}

Quantile1D rotate(const Quantile1D& q, long shift) {
  Quantile1D out;
  out.mode = q.mode;
  out.q.resize(q.m());
  for (long k = 0; k < long(q.m()); ++k) out.q[k] = q.at(k + shift);
  return out;
}

}  // namespace bpl

// ---- smooth reconstructions ----

namespace bpl {

PeriodicTrig::PeriodicTrig(const std::vector<double>& y, double offset) {
  const int n = int(y.size());
  const int half = n / 2;
  std::vector<double> ct(n), st(n);
  for (int r = 0; r < n; ++r) {
    ct[r] = std::cos(2.0 * M_PI * r / n);
    st[r] = std::sin(2.0 * M_PI * r / n);
  }
  a_.assign(half + 1, 0.0);
  b_.assign(half + 1, 0.0);
  for (int k = 0; k <= half; ++k) {
    double sa = 0.0, sb = 0.0;
    for (int j = 0; j < n; ++j) {
      const int r = int((long(k) * j) % n);
      sa += y[j] * ct[r];
      sb += y[j] * st[r];
    }
    const bool nyquist = n % 2 == 0 && k == half;
    const double w = (k == 0 || nyquist) ? 1.0 / n : 2.0 / n;
    // Undo the sample offset: coefficients of cos/sin(2πk x) rather than of 2πk(x − offset/N).
    const double ph = 2.0 * M_PI * k * offset / n, c = std::cos(ph), s = std::sin(ph);
    const double A = w * sa, B = nyquist ? 0.0 : w * sb;
    a_[k] = A * c - B * s;
    b_[k] = A * s + B * c;
    if (nyquist) {  // keep the Nyquist term real at the nodes
      a_[k] = A * c;
      b_[k] = A * s;
    }
  }
}

double PeriodicTrig::operator()(double x, double* deriv) const {
  double g = a_.empty() ? 0.0 : a_[0], dg = 0.0;
  const double th = 2.0 * M_PI * x;
  const double c1 = std::cos(th), s1 = std::sin(th);
  double c = 1.0, s = 0.0;
  for (std::size_t k = 1; k < a_.size(); ++k) {
    const double cn = c * c1 - s * s1, sn = s * c1 + c * s1;
    c = cn;
    s = sn;
    g += a_[k] * c + b_[k] * s;
    dg += 2.0 * M_PI * double(k) * (b_[k] * c - a_[k] * s);
  }
  if (deriv) *deriv = dg;
  return g;
}

namespace {

// Solves x + G(x) = r for x in [lo, hi], where the bracket is known to hold the root.
template <class G>
double invert_lifted(const G& periodic, double r, double lo, double hi) {
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 80; ++it) {
    double d = 0.0;
    const double f = periodic(x, &d) + x - r;
    if (f == 0.0) break;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    double xn = x - f / (1.0 + d);
    if (std::abs(xn - x) <= 1e-16 * std::max(1.0, std::abs(x))) return xn;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    x = xn;
    if (hi - lo <= 1e-16) break;
  }
  return x;
}

}  // namespace

SmoothCdf::SmoothCdf(const DensityField& rho) : n_(rho.grid().n()) {
  require_1d(rho.grid(), "SmoothCdf");
  const int n = n_;
  const double h = rho.grid().h();
  edge_.assign(n + 1, 0.0);
  for (int j = 0; j < n; ++j) edge_[j + 1] = edge_[j] + rho[j] * h;
  for (double& e : edge_) e /= edge_[n];
  edge_[n] = 1.0;

  // G_j = F(x_j) − x_j is periodic; a constant density keeps G ≡ 0 exactly.
  if (rho.min() == *std::max_element(rho.values().begin(), rho.values().end())) {
    for (int j = 0; j <= n; ++j) edge_[j] = double(j) / n;
    g_ = PeriodicTrig(std::vector<double>(n, 0.0), 0.0);
    return;
  }
  std::vector<double> g(n);
  for (int j = 0; j < n; ++j) g[j] = edge_[j] - double(j) / n;
  g_ = PeriodicTrig(g, 0.0);
  double min_rec = 1e300;
  for (int j = 0; j < 4 * n; ++j) min_rec = std::min(min_rec, density((j + 0.5) / (4.0 * n)));
  if (min_rec >= 0.5 * rho.min() && min_rec > 0.0) return;

  // Fritsch–Carlson slopes on the lifted edge data.
  spectral_ = false;
  slope_.assign(n + 1, 0.0);
  std::vector<double> delta(n);
  for (int j = 0; j < n; ++j) delta[j] = (edge_[j + 1] - edge_[j]) / h;
  for (int j = 0; j < n; ++j) {
    const double dl = delta[(j + n - 1) % n], dr = delta[j];
    slope_[j] = dl * dr > 0.0 ? 2.0 * dl * dr / (dl + dr) : 0.0;  // harmonic mean keeps monotonicity
  }
  slope_[n] = slope_[0];
}

double SmoothCdf::periodic(double x, double* deriv) const {
  if (spectral_) return g_(x, deriv);
  const double h = 1.0 / n_;
  const int j = std::clamp(int(std::floor(x * n_)), 0, n_ - 1);
  const double t = (x - j * h) / h;
  const double y0 = edge_[j], y1 = edge_[j + 1], m0 = slope_[j] * h, m1 = slope_[j + 1] * h;
  const double t2 = t * t, t3 = t2 * t;
  const double f = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
  if (deriv)
    *deriv = ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1) / h - 1.0;
  return f - x;
}

double SmoothCdf::operator()(double x) const {
  const double k = std::floor(x);
  return periodic(x - k, nullptr) + x;
}

double SmoothCdf::density(double x) const {
  double d = 0.0;
  periodic(x - std::floor(x), &d);
  return 1.0 + d;
}

double SmoothCdf::quantile(double s) const {
  const double k = std::floor(s);
  const double r = s - k;
  // F is exact at cell edges, so the edge bracket holds the root.
  const int j = std::clamp(int(std::upper_bound(edge_.begin(), edge_.end(), r) - edge_.begin()) - 1, 0, n_ - 1);
  auto G = [this](double x, double* d) { return periodic(x, d); };
  return invert_lifted(G, r, double(j) / n_, double(j + 1) / n_) + k;
}

Quantile1D smooth_quantiles(const SmoothCdf& cdf, std::size_t m) {
  if (m < 2) fail(ErrorKind::InvalidArgument, "quantile lattice needs m >= 2");
  Quantile1D out;
  out.mode = TransportMode::Torus;
  out.q.resize(m);
  for (std::size_t k = 0; k < m; ++k) out.q[k] = cdf.quantile((k + 0.5) / double(m));
  return out;
}

Quantile1D smooth_quantiles(const DensityField& rho, std::size_t m) { return smooth_quantiles(SmoothCdf(rho), m); }

DensityField smooth_to_density(const Quantile1D& q, const TorusGrid& grid) {
  require_1d(grid, "smooth_to_density");
  if (q.mode != TransportMode::Torus) fail(ErrorKind::InvalidArgument, "smooth_to_density needs a torus lattice");
  const long m = long(q.m());
  // R(s) = Q(s) − s is periodic; Q(s_k) = q_k at s_k = (k+½)/m.
  std::vector<double> r(m);
  for (long k = 0; k < m; ++k) r[k] = q.q[k] - (k + 0.5) / double(m);
  const PeriodicTrig R(r, 0.5);
  for (long k = 0; k < 4 * m; ++k) {
    double d = 0.0;
    R((k + 0.5) / (4.0 * m), &d);
    if (!(1.0 + d > 0.0)) return to_density(q, grid);
  }
  // F(x_j) = Q⁻¹(x_j); the piecewise-linear lattice cdf brackets each root within one particle gap.
  const int n = grid.n();
  std::vector<double> F(n + 1);
  auto QR = [&R](double s, double* d) { return R(s, d); };
  for (int j = 0; j <= n; ++j) {
    const double x = double(j) / n;
    const double s0 = q.cdf(x);
    const double w = 2.0 / double(m);
    double lo = s0 - w, hi = s0 + w;
    while (R(lo) + lo > x) lo -= w;
    while (R(hi) + hi < x) hi += w;
    F[j] = invert_lifted(QR, x, lo, hi);
  }
  std::vector<double> cm(n);
  for (int j = 0; j < n; ++j) cm[j] = (F[j + 1] - F[j]) / grid.h();
  return normalize(std::move(cm), grid);
}

}  // namespace bpl
