#include "topo/numerics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>

namespace topo {

namespace {

using cplx = std::complex<double>;
constexpr double kEps = std::numeric_limits<double>::epsilon();
/// RK4 stability bound on the imaginary axis, slightly below 2*sqrt(2).
constexpr double kRk4Limit = 2.8;

/// Plain complex product (no C99 infinity handling).
inline cplx mul(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

std::size_t product(const std::vector<int>& n) {
  std::size_t p = 1;
  for (int v : n) p *= static_cast<std::size_t>(v);
  return p;
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Real-to-complex transforms on one grid shape, last axis halved.
class Spectral {
 public:
  Spectral(std::vector<int> n, std::vector<double> L) : n_(std::move(n)), L_(std::move(L)) {
    dim_ = static_cast<int>(n_.size());
    real_size_ = product(n_);
    modes_ = real_size_ / n_.back() * (n_.back() / 2 + 1);
    in_ = fftw_alloc_real(real_size_);
    out_ = fftw_alloc_complex(modes_);
    fwd_ = fftw_plan_dft_r2c(dim_, n_.data(), in_, out_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(dim_, n_.data(), out_, in_, FFTW_ESTIMATE);
    k_.resize(modes_);
    kint_.resize(modes_);
    nyquist_.resize(modes_);
    keep_.resize(modes_);
    std::vector<int> shape = n_;
    shape.back() = n_.back() / 2 + 1;
    for (std::size_t m = 0; m < modes_; ++m) {
      std::size_t rest = m;
      std::array<int, 3> idx{};
      for (int a = dim_ - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(rest % shape[a]);
        rest /= shape[a];
      }
      bool keep = true;
      for (int a = 0; a < dim_; ++a) {
        int na = n_[a];
        int ki = idx[a] <= na / 2 ? idx[a] : idx[a] - na;
        kint_[m][a] = ki;
        k_[m][a] = 2 * std::numbers::pi / L_[a] * ki;
        nyquist_[m][a] = na % 2 == 0 && idx[a] == na / 2;
        if (3 * std::abs(ki) >= na) keep = false;
      }
      keep_[m] = keep;
    }
  }
  ~Spectral() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(in_);
    fftw_free(out_);
  }
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  std::size_t modes() const { return modes_; }
  std::size_t real_size() const { return real_size_; }
  int dim() const { return dim_; }
  const std::array<double, 3>& k(std::size_t m) const { return k_[m]; }
  bool kept(std::size_t m) const { return keep_[m]; }

  std::vector<cplx> forward(const std::vector<double>& f) {
    std::copy(f.begin(), f.end(), in_);
    fftw_execute(fwd_);
    std::vector<cplx> r(modes_);
    for (std::size_t m = 0; m < modes_; ++m) r[m] = {out_[m][0], out_[m][1]};
    return r;
  }
  std::vector<double> inverse(const std::vector<cplx>& fh) {
    for (std::size_t m = 0; m < modes_; ++m) {
      out_[m][0] = fh[m].real();
      out_[m][1] = fh[m].imag();
    }
    return run_inverse();
  }
  std::vector<double> run_inverse() {
    fftw_execute(bwd_);
    std::vector<double> r(in_, in_ + real_size_);
    double s = 1.0 / static_cast<double>(real_size_);
    for (double& v : r) v *= s;
    return r;
  }

  /// prod_a (i k_a)^{d_a}; zero at a Nyquist index of odd order.
  cplx symbol(std::size_t m, const MultiIndex& d) const {
    cplx s = 1;
    for (int a = 0; a < dim_; ++a) {
      int p = d[a + 1];
      if (p == 0) continue;
      if (nyquist_[m][a] && p % 2 == 1) return 0;
      cplx ik(0, k_[m][a]);
      for (int j = 0; j < p; ++j) s *= ik;
    }
    return s;
  }

  std::vector<double> derivative(const std::vector<cplx>& fh, const MultiIndex& d) {
    if (spatial_order(d) == 0) return inverse(fh);
    for (std::size_t m = 0; m < modes_; ++m) {
      cplx v = mul(fh[m], symbol(m, d));
      out_[m][0] = v.real();
      out_[m][1] = v.imag();
    }
    return run_inverse();
  }

  void dealias(std::vector<cplx>& fh) const {
    for (std::size_t m = 0; m < modes_; ++m)
      if (!keep_[m]) fh[m] = 0;
  }

 private:
  std::vector<int> n_;
  std::vector<double> L_;
  int dim_ = 1;
  std::size_t real_size_ = 0, modes_ = 0;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan fwd_{}, bwd_{};
  std::vector<std::array<double, 3>> k_;
  std::vector<std::array<int, 3>> kint_;
  std::vector<std::array<bool, 3>> nyquist_;
  std::vector<bool> keep_;
};

void check_jet(const Symbol& s, int dim) {
  if (s.id != field_u())
    throw std::invalid_argument("grid evaluation knows only u, got " + to_string(s));
  if (s.deriv[kTime] > 1)
    throw DerivativeOrderTooHigh("time order " + std::to_string(s.deriv[kTime]) + " in " + to_string(s) +
                                 "; only u and u_t are available");
  if (spatial_order(s.deriv) > kMaxSpatialOrder)
    throw DerivativeOrderTooHigh(to_string(s) + " exceeds spatial order " + std::to_string(kMaxSpatialOrder));
  for (int a = dim + 1; a < kSlots; ++a)
    if (s.deriv[a] != 0) throw std::invalid_argument(to_string(s) + " uses an axis beyond dimension " + std::to_string(dim));
}

/// Jet arrays of u and u_t, cached per derivative.
class JetCache {
 public:
  JetCache(const FieldState& f, Spectral& sp) : f_(f), sp_(sp) {}
  const std::vector<double>& get(const Symbol& s) {
    auto it = cache_.find(s.deriv);
    if (it != cache_.end()) return it->second;
    bool timed = s.deriv[kTime] == 1;
    if (timed && !f_.u_t) throw DerivativeOrderTooHigh(to_string(s) + " needs u_t, which was not supplied");
    const GridField& g = timed ? *f_.u_t : *f_.u;
    auto& hat = timed ? ut_hat_ : u_hat_;
    if (spatial_order(s.deriv) > 0 && hat.empty()) hat = sp_.forward(g.data);
    if (spatial_order(s.deriv) == 0) return g.data;
    return cache_.emplace(s.deriv, sp_.derivative(hat, s.deriv)).first->second;
  }

 private:
  FieldState f_;
  Spectral& sp_;
  std::vector<cplx> u_hat_, ut_hat_;
  std::map<MultiIndex, std::vector<double>> cache_;
};

/// Expression flattened for pointwise evaluation. Channels 0..jets-1 are jet
/// arrays; channels jets..jets+2 the coordinates x, y, z.
struct Compiled {
  struct Term {
    double c;
    std::vector<std::pair<int, int>> f;
  };
  std::vector<Term> terms;
  std::vector<const std::vector<double>*> jets;
  bool uses_coords = false;

  double at(std::size_t p, const std::array<double, 3>& x) const {
    double sum = 0;
    for (const auto& t : terms) {
      double v = t.c;
      for (auto [ch, pw] : t.f) {
        double b = ch < static_cast<int>(jets.size()) ? (*jets[ch])[p] : x[ch - jets.size()];
        for (int i = 0; i < pw; ++i) v *= b;
      }
      sum += v;
    }
    return sum;
  }
};

Compiled compile(const JetExpr& e, int dim, double t, JetCache& cache, const FunBindings& funs,
                 const ParamValues& params) {
  auto& reg = SymbolRegistry::instance();
  Compiled c;
  std::map<Symbol, int> channel;
  for (const auto& [m, coef] : e.terms()) {
    Compiled::Term term{coef.get_d(), {}};
    for (const auto& f : m.factors) {
      const Symbol& s = f.sym;
      switch (s.kind) {
        case SymbolKind::Param: {
          std::string name = reg.param_name(s.id);
          auto it = params.find(name);
          if (it == params.end()) throw MissingBinding(s);
          term.c *= std::pow(it->second, f.power);
          break;
        }
        case SymbolKind::Indep:
          if (s.id == kTime) {
            term.c *= std::pow(t, f.power);
          } else {
            if (s.id > dim) throw std::invalid_argument(to_string(s) + " is beyond dimension " + std::to_string(dim));
            term.f.push_back({static_cast<int>(1000 + s.id - 1), f.power});
            c.uses_coords = true;
          }
          break;
        case SymbolKind::ArbFun: {
          std::string name = reg.function_name(s.id);
          if (reg.function_signature(s.id) != kSigTime)
            throw UnboundArbFun("function " + name + " depends on space; only functions of t can be bound");
          auto it = funs.find(name);
          if (it == funs.end()) throw UnboundArbFun("no binding for the time function " + name);
          term.c *= std::pow(it->second(t, s.deriv[kTime]), f.power);
          break;
        }
        case SymbolKind::Jet: {
          check_jet(s, dim);
          auto it = channel.find(s);
          if (it == channel.end()) {
            it = channel.emplace(s, static_cast<int>(c.jets.size())).first;
            c.jets.push_back(&cache.get(s));
          }
          term.f.push_back({it->second, f.power});
          break;
        }
      }
    }
    c.terms.push_back(std::move(term));
  }
  // Coordinate channels go after the jets.
  for (auto& term : c.terms)
    for (auto& [ch, pw] : term.f)
      if (ch >= 1000) ch = static_cast<int>(c.jets.size()) + ch - 1000;
  return c;
}

std::array<double, 3> coords_of(const GridField& g, std::size_t p) {
  std::array<double, 3> x{};
  for (int a = g.dim - 1; a >= 0; --a) {
    x[a] = static_cast<double>(p % g.n[a]) * g.spacing(a);
    p /= g.n[a];
  }
  return x;
}

std::vector<double> evaluate_all(const Compiled& c, const GridField& g) {
  std::vector<double> r(g.size());
  std::array<double, 3> zero{};
  for (std::size_t p = 0; p < r.size(); ++p) r[p] = c.at(p, c.uses_coords ? coords_of(g, p) : zero);
  return r;
}

void check_state(const FieldState& f) {
  if (!f.u) throw std::invalid_argument("no field supplied");
  f.u->validate();
  if (f.u_t && (f.u_t->n != f.u->n || f.u_t->period != f.u->period))
    throw std::invalid_argument("u and u_t live on different grids");
}

}  // namespace

// ---------------------------------------------------------------------------

GridField::GridField(std::vector<int> n_, std::vector<double> period_, double t_)
    : dim(static_cast<int>(n_.size())), n(std::move(n_)), period(std::move(period_)), t(t_) {
  data.assign(product(n), 0.0);
}

std::size_t GridField::size() const { return product(n); }

double GridField::cell_volume() const {
  double v = 1;
  for (double L : period) v *= L;
  return v;
}

void GridField::validate() const {
  if (dim < 1 || dim > 3) throw std::invalid_argument("grid dimension must be 1, 2 or 3");
  if (static_cast<int>(n.size()) != dim || static_cast<int>(period.size()) != dim)
    throw std::invalid_argument("grid needs one resolution and one period per axis");
  for (int a = 0; a < dim; ++a) {
    if (n[a] < 16) throw std::invalid_argument("grid resolution must be at least 16");
    if (!(period[a] > 0)) throw std::invalid_argument("grid period must be positive");
  }
  if (data.size() != size()) throw std::invalid_argument("sample array length does not match the grid");
}

GridField GridField::coarsened() const {
  std::vector<int> m = n;
  for (int& v : m) v /= 2;
  GridField c(m, period, t);
  for (std::size_t p = 0; p < c.size(); ++p) {
    std::size_t rest = p, fine = 0, stride = 1;
    std::vector<std::size_t> idx(dim);
    for (int a = dim - 1; a >= 0; --a) {
      idx[a] = rest % m[a];
      rest /= m[a];
    }
    for (int a = dim - 1; a >= 0; --a) {
      fine += 2 * idx[a] * stride;
      stride *= n[a];
    }
    c.data[p] = data[fine];
  }
  return c;
}

GridField sample_field(std::vector<int> n, std::vector<double> period,
                       const std::function<double(const std::vector<double>&)>& u0, double t) {
  GridField g(std::move(n), std::move(period), t);
  g.validate();
  std::vector<double> x(g.dim);
  for (std::size_t p = 0; p < g.size(); ++p) {
    auto c = coords_of(g, p);
    for (int a = 0; a < g.dim; ++a) x[a] = c[a];
    g.data[p] = u0(x);
  }
  return g;
}

TimeFunction builtin_time_function(const std::string& name) {
  if (name == "one") return [](double, int k) { return k == 0 ? 1.0 : 0.0; };
  if (name == "t") return [](double t, int k) { return k == 0 ? t : (k == 1 ? 1.0 : 0.0); };
  if (name == "sin") return [](double t, int k) { return std::sin(t + k * std::numbers::pi / 2); };
  throw UnboundArbFun("unknown built-in time function '" + name + "' (one, t, sin)");
}

ParamValues numeric_parameters(const CatalogEntry& entry, const ParamValues& overrides) {
  ParamValues v;
  ParseContext cx;
  cx.dim = entry.dim;
  auto number = [&](const std::string& s) {
    JetExpr e = parse_expr(s, cx);
    if (!e.is_constant()) throw std::invalid_argument("parameter value '" + s + "' is not a number");
    return e.constant_value().get_d();
  };
  for (const auto& b : entry.bindings) v[b.name] = b.squared ? std::sqrt(number(b.value)) : number(b.value);
  for (const auto& [k, s] : entry.defaults)
    if (!v.count(k)) v[k] = number(s);
  for (const auto& [k, x] : overrides) v[k] = x;
  return v;
}

std::vector<double> evaluate_on_grid(const JetExpr& e, const FieldState& fields, const FunBindings& funs,
                                     const ParamValues& params) {
  check_state(fields);
  const GridField& g = *fields.u;
  Spectral sp(g.n, g.period);
  JetCache cache(fields, sp);
  return evaluate_all(compile(e, g.dim, g.t, cache, funs, params), g);
}

std::vector<double> evaluate_on_grid(const JetExpr& e, const GridField& u, const FunBindings& funs,
                                     const ParamValues& params) {
  return evaluate_on_grid(e, FieldState{&u, nullptr}, funs, params);
}

// ---------------------------------------------------------------------------
// Evolution

namespace {

struct RhsTerm {
  MultiIndex M;
  JetExpr F;
  std::vector<cplx> symbol;
  double kmax = 0;
  // CFL weights: one entry per monomial of F.
  struct Part {
    double c;
    Symbol top;  // highest order jet factor
    int power;
    std::vector<Factor> others;
  };
  std::vector<Part> parts;
};

class Evolver {
 public:
  Evolver(const CatalogEntry& entry, const GridField& u0, const EvolveOptions& opts)
      : opts_(opts), sp_(u0.n, u0.period) {
    const PdeSpec& pde = entry.pde;
    if (!pde.div_form) throw std::invalid_argument(entry.name + " has no divergence form to evolve");
    if (u0.dim != pde.dim) throw std::invalid_argument("initial data dimension does not match " + entry.name);
    params_ = numeric_parameters(entry, opts.params);
    const DivForm& df = *pde.div_form;
    int lead_order = 0;
    for (const auto& l : df.lead) lead_order = std::max(lead_order, spatial_order(l.spatial));
    for (const auto& r : df.rhs) {
      RhsTerm t{r.spatial, r.F, {}, 0, {}};
      for (const auto& [m, c] : r.F.terms()) {
        RhsTerm::Part part{c.get_d(), {}, 0, {}};
        int best = -1;
        for (const auto& f : m.factors) {
          if (f.sym.kind == SymbolKind::Jet && spatial_order(f.sym.deriv) > best) {
            best = spatial_order(f.sym.deriv);
            part.top = f.sym;
            part.power = f.power;
          }
        }
        for (const auto& f : m.factors)
          if (!(f.sym == part.top)) part.others.push_back(f);
        if (best >= 0) t.parts.push_back(part);
      }
      terms_.push_back(std::move(t));
    }
    switch (opts.kernel) {
      case EvolveOptions::Kernel::Reject: reject_ = true; break;
      case EvolveOptions::Kernel::Pin: reject_ = false; break;
      case EvolveOptions::Kernel::Auto: reject_ = lead_order == 1 && pde.dim >= 2; break;
    }
    std::size_t modes = sp_.modes();
    Lk_.resize(modes);
    double Lmax = 0;
    for (std::size_t m = 0; m < modes; ++m) {
      cplx s = 0;
      for (const auto& l : df.lead) s += l.coeff.get_d() * sp_.symbol(m, l.spatial);
      Lk_[m] = s;
      Lmax = std::max(Lmax, std::abs(s));
    }
    for (auto& t : terms_) {
      t.symbol.resize(modes);
      for (std::size_t m = 0; m < modes; ++m) {
        t.symbol[m] = sp_.symbol(m, t.M);
        if (sp_.kept(m)) t.kmax = std::max(t.kmax, std::abs(t.symbol[m]));
      }
    }
    kernel_.resize(modes);
    invL_.assign(modes, 0.0);
    for (std::size_t m = 0; m < modes; ++m) {
      kernel_[m] = std::abs(Lk_[m]) <= 1e-14 * Lmax;
      if (!kernel_[m]) invL_[m] = 1.0 / Lk_[m];
    }
    // Per-part mode weights |k^{M + J}| / |L(k)| for the CFL estimate.
    for (const auto& t : terms_)
      for (const auto& p : t.parts) {
        std::vector<double> w(modes, 0.0);
        MultiIndex mj = t.M;
        for (int a = 1; a < kSlots; ++a) mj[a] += p.top.deriv[a];
        for (std::size_t m = 0; m < modes; ++m)
          if (sp_.kept(m) && !kernel_[m]) w[m] = std::abs(sp_.symbol(m, mj)) / std::abs(Lk_[m]);
        weights_.push_back(std::move(w));
      }
  }

  bool rejects() const { return reject_; }
  double pinned() const { return pinned_; }
  double initial_kernel() const { return initial_kernel_; }

  /// Prepares the state: dealiased, kernel content rejected or removed.
  GridField prepare(const GridField& u0) {
    auto hat = sp_.forward(u0.data);
    sp_.dealias(hat);
    double scale = std::max(max_abs(u0.data), std::numeric_limits<double>::min());
    double content = 0;
    std::size_t N = sp_.real_size();
    for (std::size_t m = 0; m < hat.size(); ++m)
      if (kernel_[m]) content = std::max(content, std::abs(hat[m]) / static_cast<double>(N));
    if (content > 1e3 * kEps * scale) {
      if (reject_)
        throw NonIntegrableSymbol("initial data has content " + std::to_string(content) +
                                      " in the kernel of the leading operator (nonzero mean along the inverted "
                                      "direction); the inverse gradient is undefined",
                                  content);
      initial_kernel_ = content;
    }
    GridField u = u0;
    u.data = sp_.inverse(hat);
    return u;
  }

  /// u_t for a prepared state; also sets lambda_ for the CFL check.
  GridField rhs(const GridField& u) {
    GridField ut(u.n, u.period, u.t);
    FieldState fs{&u, nullptr};
    JetCache cache(fs, sp_);
    std::size_t modes = sp_.modes();
    std::vector<cplx> num(modes, 0.0);
    double scale = 0;
    for (const auto& t : terms_) {
      Compiled c = compile(t.F, u.dim, u.t, cache, {}, params_);
      std::vector<double> F = evaluate_all(c, u);
      auto Fh = sp_.forward(F);
      sp_.dealias(Fh);
      for (std::size_t m = 0; m < modes; ++m) num[m] += mul(t.symbol[m], Fh[m]);
      scale += max_abs(F) * t.kmax;
    }
    std::size_t N = sp_.real_size();
    double content = 0;
    for (std::size_t m = 0; m < modes; ++m) {
      if (kernel_[m]) {
        content = std::max(content, std::abs(num[m]) / static_cast<double>(N));
        num[m] = 0;
      } else {
        num[m] = mul(num[m], invL_[m]);
      }
    }
    if (content > 1e3 * kEps * std::max(scale, std::numeric_limits<double>::min())) {
      if (reject_)
        throw NonIntegrableSymbol("the inverse of the leading operator met content " + std::to_string(content) +
                                      " in its kernel at t = " + std::to_string(u.t),
                                  content);
      pinned_ = std::max(pinned_, content);
    }
    ut.data = sp_.inverse(num);
    // CFL estimate from the current jet magnitudes.
    std::vector<double> coef;
    for (const auto& t : terms_)
      for (const auto& p : t.parts) {
        double w = std::abs(p.c) * p.power * std::pow(max_abs(cache.get(p.top)), p.power - 1);
        for (const auto& f : p.others) {
          double v = 1;
          if (f.sym.kind == SymbolKind::Jet) v = max_abs(cache.get(f.sym));
          else if (f.sym.kind == SymbolKind::Param) v = params_.at(SymbolRegistry::instance().param_name(f.sym.id));
          else if (f.sym.kind == SymbolKind::Indep && f.sym.id > 0) v = u.period[f.sym.id - 1];
          w *= std::pow(std::abs(v), f.power);
        }
        coef.push_back(w);
      }
    lambda_ = 0;
    for (std::size_t m = 0; m < modes; ++m) {
      double s = 0;
      for (std::size_t i = 0; i < coef.size(); ++i) s += coef[i] * weights_[i][m];
      lambda_ = std::max(lambda_, s);
    }
    return ut;
  }

  double lambda() const { return lambda_; }
  const ParamValues& params() const { return params_; }

 private:
  EvolveOptions opts_;
  Spectral sp_;
  ParamValues params_;
  std::vector<RhsTerm> terms_;
  std::vector<cplx> Lk_, invL_;
  std::vector<bool> kernel_;
  std::vector<std::vector<double>> weights_;
  bool reject_ = true;
  double pinned_ = 0;
  double initial_kernel_ = 0;
  double lambda_ = 0;
};

GridField axpy(const GridField& u, double a, const GridField& k) {
  GridField r = u;
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] += a * k.data[i];
  return r;
}

}  // namespace

GridField time_derivative(const CatalogEntry& entry, const GridField& u, const EvolveOptions& opts) {
  u.validate();
  Evolver ev(entry, u, opts);
  return ev.rhs(ev.prepare(u));
}

Trajectory evolve(const CatalogEntry& entry, const GridField& u0, const EvolveOptions& opts) {
  u0.validate();
  if (!(opts.t_end >= 0)) throw std::invalid_argument("t_end must be nonnegative");
  Evolver ev(entry, u0, opts);
  Trajectory tr;
  auto& rep = tr.report;
  rep.dealiasing = "2/3 rule on every axis; products formed on the grid and truncated";
  rep.kernel_policy = ev.rejects() ? "reject" : "pin";
  GridField u = ev.prepare(u0);
  u.t = 0;
  GridField k1 = ev.rhs(u);
  rep.stability_limit = ev.lambda() > 0 ? kRk4Limit / ev.lambda() : std::numeric_limits<double>::infinity();
  double dt = opts.dt > 0 ? opts.dt : 0.9 * rep.stability_limit;
  if (!std::isfinite(dt)) dt = opts.t_end > 0 ? opts.t_end : 1.0;
  rep.dt = dt;
  tr.u.push_back(u);
  tr.u_t.push_back(k1);
  if (opts.observer) opts.observer(u, k1);
  double interval = opts.sample_interval > 0 ? opts.sample_interval : opts.t_end;
  long nint = opts.t_end > 0 ? static_cast<long>(std::ceil(opts.t_end / interval - 1e-9)) : 0;
  for (long j = 0; j < nint; ++j) {
    double t0 = j * interval;
    double t1 = std::min((j + 1) * interval, opts.t_end);
    long nsub = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / dt - 1e-9)));
    double h = (t1 - t0) / nsub;
    for (long s = 0; s < nsub; ++s) {
      if (h * ev.lambda() > kRk4Limit)
        throw CflViolation("step " + std::to_string(h) + " exceeds the stability limit " +
                               std::to_string(kRk4Limit / ev.lambda()) + " at t = " + std::to_string(u.t),
                           h, kRk4Limit / ev.lambda());
      double t = t0 + s * h;
      GridField a = axpy(u, h / 2, k1);
      a.t = t + h / 2;
      GridField k2 = ev.rhs(a);
      GridField b = axpy(u, h / 2, k2);
      b.t = t + h / 2;
      GridField k3 = ev.rhs(b);
      GridField c = axpy(u, h, k3);
      c.t = t + h;
      GridField k4 = ev.rhs(c);
      for (std::size_t i = 0; i < u.data.size(); ++i)
        u.data[i] += h / 6 * (k1.data[i] + 2 * k2.data[i] + 2 * k3.data[i] + k4.data[i]);
      u.t = s + 1 == nsub ? t1 : t + h;
      k1 = ev.rhs(u);
      ++rep.steps;
      if (opts.observer) opts.observer(u, k1);
    }
    tr.u.push_back(u);
    tr.u_t.push_back(k1);
  }
  rep.pinned_kernel = ev.pinned();
  rep.initial_kernel = ev.initial_kernel();
  if (rep.initial_kernel > 0)
    rep.notes.push_back("initial data has kernel content " + std::to_string(rep.initial_kernel) +
                        " of the leading operator; it is carried unchanged");
  if (rep.pinned_kernel > 0)
    rep.notes.push_back("kernel content of the evolution operand pinned to zero (max amplitude " +
                        std::to_string(rep.pinned_kernel) + ")");
  return tr;
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

/// Tensor-product cubic Hermite interpolation from the values and the mixed
/// first derivatives D^S f (S a subset of the axes) at grid nodes.
class Hermite {
 public:
  Hermite(const JetExpr& e, const FieldState& fields, const FunBindings& funs, const ParamValues& params)
      : g_(*fields.u) {
    Spectral sp(g_.n, g_.period);
    JetCache cache(fields, sp);
    int d = g_.dim;
    for (unsigned s = 0; s < (1u << d); ++s) {
      JetExpr de = e;
      for (int a = 0; a < d; ++a)
        if (s & (1u << a)) de = total_derivative(de, a + 1);
      data_.push_back(evaluate_all(compile(de, d, g_.t, cache, funs, params), g_));
    }
  }

  /// Cell of x and local coordinates; throws when x is outside the nodes
  /// [0, (n-1) h] of some axis.
  void locate(const std::array<double, 3>& x, std::array<int, 3>& i, std::array<double, 3>& s) const {
    for (int a = 0; a < g_.dim; ++a) {
      double h = g_.spacing(a);
      double top = (g_.n[a] - 1) * h;
      if (x[a] < -1e-12 * top || x[a] > top * (1 + 1e-12))
        throw std::out_of_range("point outside the interpolation range [0, " + std::to_string(top) + "] on axis " +
                                std::to_string(a));
      double q = std::clamp(x[a] / h, 0.0, static_cast<double>(g_.n[a] - 1));
      int c = std::min(static_cast<int>(std::floor(q)), g_.n[a] - 2);
      i[a] = c;
      s[a] = q - c;
    }
  }

  std::size_t node(const std::array<int, 3>& i, unsigned corner) const {
    std::size_t p = 0;
    for (int a = 0; a < g_.dim; ++a) p = p * g_.n[a] + i[a] + ((corner >> a) & 1u);
    return p;
  }

  double value(const std::array<double, 3>& x) const {
    std::array<int, 3> i{};
    std::array<double, 3> s{};
    locate(x, i, s);
    int d = g_.dim;
    double sum = 0;
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
      std::size_t p = node(i, corner);
      for (unsigned sub = 0; sub < (1u << d); ++sub) {
        double w = data_[sub][p];
        for (int a = 0; a < d; ++a) {
          bool end = (corner >> a) & 1u;
          double t = s[a];
          if (sub & (1u << a)) {
            double h1 = end ? t * t * t - t * t : t * t * t - 2 * t * t + t;
            w *= h1 * g_.spacing(a);
          } else {
            double h0 = end ? -2 * t * t * t + 3 * t * t : 2 * t * t * t - 3 * t * t + 1;
            w *= h0;
          }
        }
        sum += w;
      }
    }
    return sum;
  }

  /// Multilinear interpolation of D_axis f, for end corrections.
  double gradient(const std::array<double, 3>& x, int axis) const {
    std::array<int, 3> i{};
    std::array<double, 3> s{};
    locate(x, i, s);
    const auto& arr = data_[1u << axis];
    double sum = 0;
    for (unsigned corner = 0; corner < (1u << g_.dim); ++corner) {
      double w = arr[node(i, corner)];
      for (int a = 0; a < g_.dim; ++a) w *= ((corner >> a) & 1u) ? s[a] : 1 - s[a];
      sum += w;
    }
    return sum;
  }

  double min_spacing() const {
    double h = g_.spacing(0);
    for (int a = 1; a < g_.dim; ++a) h = std::min(h, g_.spacing(a));
    return h;
  }

 private:
  const GridField& g_;
  std::vector<std::vector<double>> data_;
};

}  // namespace

CurveSpec CurveSpec::rectangle(double x0, double y0, double x1, double y1) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}};
}

int CurveSpec::orientation() const {
  double area = 0;
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i)
    area += vertices[i][0] * vertices[i + 1][1] - vertices[i + 1][0] * vertices[i][1];
  return area >= 0 ? 1 : -1;
}

void CurveSpec::validate() const {
  if (vertices.size() < 4) throw CurveNotClosed("a closed curve needs at least three distinct vertices");
  if (vertices.front() != vertices.back()) throw CurveNotClosed("first and last vertices differ");
}

QuadratureResult line_integral(const JetExpr& a, const JetExpr& b, const FieldState& fields, const CurveSpec& curve,
                               const FunBindings& funs, const ParamValues& params) {
  curve.validate();
  check_state(fields);
  if (fields.u->dim != 2) throw std::invalid_argument("loop integrals need a 2D field");
  Hermite A(a, fields, funs, params), B(b, fields, funs, params);
  double target = A.min_spacing() / 2;
  QuadratureResult r;
  for (std::size_t v = 0; v + 1 < curve.vertices.size(); ++v) {
    auto P = curve.vertices[v], Q = curve.vertices[v + 1];
    double dx = Q[0] - P[0], dy = Q[1] - P[1];
    double len = std::hypot(dx, dy);
    if (len == 0) continue;
    double ex = dx / len, ey = dy / len;
    long m = std::max(1L, static_cast<long>(std::ceil(len / target)));
    double h = len / m;
    auto at = [&](long k) { return std::array<double, 3>{P[0] + k * h * ex, P[1] + k * h * ey, 0}; };
    auto g = [&](const std::array<double, 3>& x) { return A.value(x) * ex + B.value(x) * ey; };
    auto gp = [&](const std::array<double, 3>& x) {
      return ex * ex * A.gradient(x, 0) + ex * ey * (A.gradient(x, 1) + B.gradient(x, 0)) + ey * ey * B.gradient(x, 1);
    };
    double sum = 0, mag = 0;
    for (long k = 0; k <= m; ++k) {
      double w = (k == 0 || k == m) ? h / 2 : h;
      double val = g(at(k));
      sum += w * val;
      mag += w * std::abs(val);
    }
    sum -= h * h / 12 * (gp(at(m)) - gp(at(0)));
    r.value += sum;
    r.magnitude += mag;
    r.nodes += m + 1;
  }
  return r;
}

QuadratureResult loop_integral(const Vec& gamma, const FieldState& fields, const CurveSpec& curve,
                               const FunBindings& funs, const ParamValues& params) {
  if (gamma.size() != 2) throw std::invalid_argument("loop integrals need a 2-component flux");
  return line_integral(-gamma[1], gamma[0], fields, curve, funs, params);
}

QuadratureResult surface_integral(const Vec& gamma, const FieldState& fields, const BoxSpec& box,
                                  const FunBindings& funs, const ParamValues& params) {
  check_state(fields);
  if (fields.u->dim != 3 || gamma.size() != 3) throw std::invalid_argument("surface integrals need 3D data");
  QuadratureResult r;
  for (int a = 0; a < 3; ++a) {
    Hermite H(gamma[a], fields, funs, params);
    int b = (a + 1) % 3, c = (a + 2) % 3;
    double target = H.min_spacing() / 2;
    long mb = std::max(1L, static_cast<long>(std::ceil((box.hi[b] - box.lo[b]) / target)));
    long mc = std::max(1L, static_cast<long>(std::ceil((box.hi[c] - box.lo[c]) / target)));
    double hb = (box.hi[b] - box.lo[b]) / mb, hc = (box.hi[c] - box.lo[c]) / mc;
    for (int side = 0; side < 2; ++side) {
      double sign = side ? 1.0 : -1.0;
      std::array<double, 3> x{};
      x[a] = side ? box.hi[a] : box.lo[a];
      double sum = 0, mag = 0;
      for (long i = 0; i <= mb; ++i)
        for (long j = 0; j <= mc; ++j) {
          x[b] = box.lo[b] + i * hb;
          x[c] = box.lo[c] + j * hc;
          double w = hb * hc * ((i == 0 || i == mb) ? 0.5 : 1.0) * ((j == 0 || j == mc) ? 0.5 : 1.0);
          double v = H.value(x);
          sum += w * v;
          mag += w * std::abs(v);
        }
      // End corrections along each face direction, integrated along the edges.
      double corr = 0;
      for (long j = 0; j <= mc; ++j) {
        double w = hc * ((j == 0 || j == mc) ? 0.5 : 1.0);
        x[c] = box.lo[c] + j * hc;
        x[b] = box.hi[b];
        double hi = H.gradient(x, b);
        x[b] = box.lo[b];
        corr += w * hb * hb / 12 * (hi - H.gradient(x, b));
      }
      for (long i = 0; i <= mb; ++i) {
        double w = hb * ((i == 0 || i == mb) ? 0.5 : 1.0);
        x[b] = box.lo[b] + i * hb;
        x[c] = box.hi[c];
        double hi = H.gradient(x, c);
        x[c] = box.lo[c];
        corr += w * hc * hc / 12 * (hi - H.gradient(x, c));
      }
      r.value += sign * (sum - corr);
      r.magnitude += mag;
      r.nodes += static_cast<std::size_t>((mb + 1) * (mc + 1));
    }
  }
  return r;
}

QuadratureResult cell_integral(const JetExpr& e, const FieldState& fields, const FunBindings& funs,
                               const ParamValues& params) {
  check_state(fields);
  const GridField& g = *fields.u;
  Spectral sp(g.n, g.period);
  JetCache cache(fields, sp);
  Compiled c = compile(e, g.dim, g.t, cache, funs, params);
  // Closed lattice 0..n per axis; field values wrap, coordinates do not.
  std::vector<int> m(g.dim);
  std::size_t total = 1;
  for (int a = 0; a < g.dim; ++a) {
    m[a] = g.n[a] + 1;
    total *= m[a];
  }
  QuadratureResult r;
  for (std::size_t q = 0; q < total; ++q) {
    std::size_t rest = q, p = 0;
    std::array<double, 3> x{};
    std::array<int, 3> idx{};
    for (int a = g.dim - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rest % m[a]);
      rest /= m[a];
    }
    double w = 1;
    for (int a = 0; a < g.dim; ++a) {
      p = p * g.n[a] + (idx[a] % g.n[a]);
      x[a] = idx[a] * g.spacing(a);
      w *= g.spacing(a) * ((idx[a] == 0 || idx[a] == g.n[a]) ? 0.5 : 1.0);
    }
    double v = c.at(p, x);
    r.value += w * v;
    r.magnitude += w * std::abs(v);
  }
  r.nodes = total;
  return r;
}

double operational_tolerance(const QuadratureResult& fine, const QuadratureResult& coarse) {
  return 10 * (std::abs(fine.value - coarse.value) + 64 * kEps * fine.magnitude);
}

// ---------------------------------------------------------------------------
// 1D source/sink and constraints

JetExpr source_sink_flux(const CatalogEntry& entry) {
  const PdeSpec& pde = entry.pde;
  if (pde.dim != 1) throw std::invalid_argument("source/sink extraction needs a 1D entry");
  if (!pde.div_form) throw std::invalid_argument(entry.name + " has no divergence form");
  const DivForm& df = *pde.div_form;
  MultiIndex dx = multi_index_from_letters("x");
  if (df.lead.size() != 1 || df.lead[0].spatial != dx)
    throw std::invalid_argument(entry.name + " is not of the form D_x u_t = D_x F");
  JetExpr F;
  for (const auto& r : df.rhs) {
    if (r.spatial != dx) throw std::invalid_argument(entry.name + " is not of the form D_x u_t = D_x F");
    F += r.F;
  }
  return F * (Rational(1) / df.lead[0].coeff);
}

SourceSinkReport extract_source_sink(const CatalogEntry& entry, const Trajectory& traj, const ParamValues& params) {
  JetExpr F = source_sink_flux(entry);
  ParamValues pv = numeric_parameters(entry, params);
  const auto& u = traj.u;
  bool direct = traj.u_t.size() == u.size();
  std::size_t lo = direct ? 0 : 2;
  if (!direct) {
    if (u.size() < 5) throw std::invalid_argument("source/sink extraction needs u_t or at least five samples");
    double h = u[1].t - u[0].t;
    for (std::size_t i = 1; i < u.size(); ++i)
      if (std::abs(u[i].t - u[i - 1].t - h) > 1e-9 * std::max(1.0, std::abs(h)))
        throw std::invalid_argument("source/sink extraction needs equally spaced samples");
  }
  SourceSinkReport r;
  for (std::size_t i = lo; i + lo < u.size(); ++i) {
    std::vector<double> Fv = evaluate_on_grid(F, u[i], {}, pv);
    std::vector<double> d(Fv.size());
    double h = direct ? 0 : u[1].t - u[0].t;
    for (std::size_t p = 0; p < d.size(); ++p) {
      double ut = direct ? traj.u_t[i].data[p]
                         : (u[i - 2].data[p] - 8 * u[i - 1].data[p] + 8 * u[i + 1].data[p] - u[i + 2].data[p]) / (12 * h);
      d[p] = ut - Fv[p];
    }
    double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double dev = 0;
    for (double v : d) dev = std::max(dev, std::abs(v - mean));
    r.times.push_back(u[i].t);
    r.w.push_back(mean);
    r.deviation.push_back(dev);
    r.max_deviation = std::max(r.max_deviation, dev);
  }
  return r;
}

ConstraintCheck check_constraint(const JetExpr& T, const GridField& u0, DomainMode mode, const FunBindings& funs,
                                 const ParamValues& params) {
  u0.validate();
  GridField coarse = u0.coarsened();
  ConstraintCheck c;
  QuadratureResult fine = cell_integral(T, FieldState{&u0, nullptr}, funs, params);
  QuadratureResult crs;
  bool have_coarse = true;
  try {
    coarse.validate();
    crs = cell_integral(T, FieldState{&coarse, nullptr}, funs, params);
  } catch (const std::invalid_argument&) {
    have_coarse = false;
  }
  c.value = fine.value;
  c.tolerance = have_coarse ? operational_tolerance(fine, crs) : 10 * 64 * kEps * fine.magnitude;
  c.satisfied = std::abs(c.value) <= c.tolerance;
  c.verdict = c.satisfied ? "satisfied" : "violated";
  if (mode == DomainMode::Decay) {
    double edge = 0;
    for (std::size_t p = 0; p < u0.size(); ++p) {
      auto x = coords_of(u0, p);
      for (int a = 0; a < u0.dim; ++a)
        if (x[a] == 0) edge = std::max(edge, std::abs(u0.data[p]));
    }
    c.verdict += " (decay mode, max |u0| on the cell boundary " + std::to_string(edge) + ")";
  }
  return c;
}

ConstraintCheck check_constraint(const DivergenceIdentity& identity, const GridField& u0, DomainMode mode,
                                 const FunBindings& funs, const ParamValues& params) {
  return check_constraint(identity.T, u0, mode, funs, params);
}

}  // namespace topo
