#include "sfkit/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sfkit/parallel.hpp"

namespace sfkit {

void SsmParams::validate() const {
  if (channels < 1 || state_dim < 1) throw InputError("SsmParams: C and S must be >= 1");
  auto expect = [&](const Tensor& t, std::vector<std::size_t> shape, const char* name) {
    if (t.shape() != shape) throw InputError(std::string("SsmParams: bad shape for ") + name);
  };
  expect(A, {channels, state_dim}, "A");
  expect(D, {channels}, "D");
  expect(w_delta, {channels, channels}, "w_delta");
  expect(b_delta, {channels}, "b_delta");
  expect(w_b, {channels, state_dim}, "w_b");
  expect(b_b, {state_dim}, "b_b");
  expect(w_c, {channels, state_dim}, "w_c");
  expect(b_c, {state_dim}, "b_c");
  for (double v : A.values()) {
    if (!(v < 0.0)) throw InputError("SsmParams: A entries must be strictly negative");
  }
}

SsmParams hippo_init(std::size_t channels, std::size_t state_dim, Rng& rng) {
  if (channels < 1 || state_dim < 1) throw InputError("hippo_init: C and S must be >= 1");
  SsmParams p;
  p.channels = channels;
  p.state_dim = state_dim;
  p.A = Tensor({channels, state_dim});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t n = 0; n < state_dim; ++n) {
      p.A[c * state_dim + n] = -static_cast<double>(n + 1);
    }
  }
  p.D = Tensor::full({channels}, 1.0);
  const double r = 1.0 / std::sqrt(static_cast<double>(channels));
  auto fill_uniform = [&](Tensor& t) {
    for (double& v : t.values()) v = rng.uniform(-r, r);
  };
  p.w_delta = Tensor({channels, channels});
  fill_uniform(p.w_delta);
  p.w_b = Tensor({channels, state_dim});
  fill_uniform(p.w_b);
  p.w_c = Tensor({channels, state_dim});
  fill_uniform(p.w_c);
  p.b_b = Tensor({state_dim});
  p.b_c = Tensor({state_dim});
  p.b_delta = Tensor({channels});
  const double lo = std::log(0.001), hi = std::log(0.1);
  for (std::size_t c = 0; c < channels; ++c) {
    const double dt = std::exp(rng.uniform(lo, hi));
    // softplus inverse, so softplus(b_delta) == dt at zero input
    p.b_delta[c] = std::log(std::expm1(dt));
  }
  p.validate();
  return p;
}

SsmParams pinned_params(std::size_t channels, std::size_t state_dim, double delta,
                        const std::vector<double>& b_const, const std::vector<double>& c_const,
                        double a, double d) {
  if (b_const.size() != state_dim || c_const.size() != state_dim) {
    throw InputError("pinned_params: b/c constants must have length S");
  }
  if (!(delta > 0.0)) throw InputError("pinned_params: delta must be positive");
  SsmParams p;
  p.channels = channels;
  p.state_dim = state_dim;
  p.A = Tensor::full({channels, state_dim}, a);
  p.D = Tensor::full({channels}, d);
  p.w_delta = Tensor({channels, channels});
  p.b_delta = Tensor::full({channels}, std::log(std::expm1(delta)));
  p.w_b = Tensor({channels, state_dim});
  p.b_b = Tensor({state_dim}, std::vector<double>(b_const));
  p.w_c = Tensor({channels, state_dim});
  p.b_c = Tensor({state_dim}, std::vector<double>(c_const));
  p.validate();
  return p;
}

Discretized discretize(const std::vector<double>& a_row, const std::vector<double>& b_t,
                       double delta) {
  if (!(delta > 0.0)) throw InputError("discretize: delta must be > 0");
  if (a_row.size() != b_t.size()) throw InputError("discretize: A row and B length mismatch");
  Discretized out;
  out.a_bar.resize(a_row.size());
  out.b_bar.resize(a_row.size());
  for (std::size_t n = 0; n < a_row.size(); ++n) {
    out.a_bar[n] = std::exp(delta * a_row[n]);
    out.b_bar[n] = delta * b_t[n];
  }
  return out;
}

namespace {

template <typename Real>
struct Projections {
  std::vector<Real> z_delta;  // N*C
  std::vector<Real> delta;    // N*C
  std::vector<Real> b_in;     // N*S
  std::vector<Real> c_out;    // N*S
};

template <typename Real>
Real softplus_r(Real x) {
  return std::max<Real>(x, Real(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Real>
std::vector<Real> to_real(const Tensor& t) {
  std::vector<Real> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<Real>(t[i]);
  return out;
}

// x[N,Cin] * w[Cin,Cout] + b[Cout]
template <typename Real>
std::vector<Real> affine(const std::vector<Real>& x, std::size_t n, std::size_t cin,
                         const std::vector<Real>& w, std::size_t cout,
                         const std::vector<Real>& b) {
  std::vector<Real> out(n * cout);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < cout; ++j) out[r * cout + j] = b[j];
    for (std::size_t i = 0; i < cin; ++i) {
      const Real xv = x[r * cin + i];
      for (std::size_t j = 0; j < cout; ++j) out[r * cout + j] += xv * w[i * cout + j];
    }
  }
  return out;
}

template <typename Real>
Projections<Real> project_inputs(const SsmParams& p, const std::vector<Real>& x, std::size_t n) {
  const std::size_t c = p.channels, s = p.state_dim;
  Projections<Real> pr;
  pr.z_delta = affine<Real>(x, n, c, to_real<Real>(p.w_delta), c, to_real<Real>(p.b_delta));
  pr.delta.resize(n * c);
  for (std::size_t i = 0; i < n * c; ++i) pr.delta[i] = softplus_r<Real>(pr.z_delta[i]);
  pr.b_in = affine<Real>(x, n, c, to_real<Real>(p.w_b), s, to_real<Real>(p.b_b));
  pr.c_out = affine<Real>(x, n, c, to_real<Real>(p.w_c), s, to_real<Real>(p.b_c));
  return pr;
}

template <typename Real>
std::vector<Real> scan_seq_impl(const SsmParams& p, const std::vector<Real>& x, std::size_t n,
                                const Projections<Real>& pr, std::vector<Real>* h_trace) {
  const std::size_t c = p.channels, s = p.state_dim;
  const std::vector<Real> a = to_real<Real>(p.A);
  const std::vector<Real> d = to_real<Real>(p.D);
  std::vector<Real> h(c * s, Real(0));
  std::vector<Real> y(n * c);
  if (h_trace) h_trace->assign(n * c * s, Real(0));
  for (std::size_t t = 0; t < n; ++t) {
    const Real* bt = pr.b_in.data() + t * s;
    const Real* ct = pr.c_out.data() + t * s;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const Real dc = pr.delta[t * c + ch];
      const Real xc = x[t * c + ch];
      Real* hc = h.data() + ch * s;
      const Real* ac = a.data() + ch * s;
      Real acc = 0;
      for (std::size_t k = 0; k < s; ++k) {
        const Real a_bar = std::exp(dc * ac[k]);
        hc[k] = a_bar * hc[k] + dc * bt[k] * xc;
        acc += ct[k] * hc[k];
      }
      y[t * c + ch] = acc + d[ch] * xc;
    }
    if (h_trace) std::copy(h.begin(), h.end(), h_trace->begin() + t * c * s);
  }
  return y;
}

template <typename Real>
std::vector<Real> scan_parallel_impl(const SsmParams& p, const std::vector<Real>& x,
                                     std::size_t n, const Projections<Real>& pr,
                                     std::size_t block_size, int workers) {
  const std::size_t c = p.channels, s = p.state_dim;
  const std::vector<Real> a = to_real<Real>(p.A);
  const std::vector<Real> d = to_real<Real>(p.D);
  std::vector<Real> y(n * c, Real(0));
  if (block_size < 1) block_size = 1;
  const std::size_t blocks = (n + block_size - 1) / block_size;

  // per-channel pair arrays (a_bar, b_bar*x), scanned blockwise
  std::vector<Real> pa(n * s), pb(n * s);
  std::vector<Real> carries((blocks + 1) * s);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const Real* ac = a.data() + ch * s;
    // pass 1: fill pairs and take the local prefix within each block;
    // blocks touch disjoint rows, so this is safe to run striped
    parallel_for(blocks, workers, [&](std::size_t blk) {
      const std::size_t begin = blk * block_size;
      const std::size_t end = std::min(n, begin + block_size);
      for (std::size_t t = begin; t < end; ++t) {
        const Real dc = pr.delta[t * c + ch];
        const Real xc = x[t * c + ch];
        const Real* bt = pr.b_in.data() + t * s;
        Real* pat = pa.data() + t * s;
        Real* pbt = pb.data() + t * s;
        for (std::size_t k = 0; k < s; ++k) {
          pat[k] = std::exp(dc * ac[k]);
          pbt[k] = dc * bt[k] * xc;
        }
      }
      for (std::size_t t = begin + 1; t < end; ++t) {
        Real* cur_a = pa.data() + t * s;
        Real* cur_b = pb.data() + t * s;
        const Real* prev_a = pa.data() + (t - 1) * s;
        const Real* prev_b = pb.data() + (t - 1) * s;
        for (std::size_t k = 0; k < s; ++k) {
          // (a2, b2) o (a1, b1) = (a2*a1, a2*b1 + b2)
          cur_b[k] = cur_a[k] * prev_b[k] + cur_b[k];
          cur_a[k] = cur_a[k] * prev_a[k];
        }
      }
    });
    // pass 2: sequential carry states across blocks
    std::fill(carries.begin(), carries.begin() + s, Real(0));
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const std::size_t last = std::min(n, (blk + 1) * block_size) - 1;
      const Real* agg_a = pa.data() + last * s;
      const Real* agg_b = pb.data() + last * s;
      const Real* in = carries.data() + blk * s;
      Real* out = carries.data() + (blk + 1) * s;
      for (std::size_t k = 0; k < s; ++k) out[k] = agg_a[k] * in[k] + agg_b[k];
    }
    // pass 3: apply carries, reduce against C_t
    parallel_for(blocks, workers, [&](std::size_t blk) {
      const std::size_t begin = blk * block_size;
      const std::size_t end = std::min(n, begin + block_size);
      const Real* carry = carries.data() + blk * s;
      for (std::size_t t = begin; t < end; ++t) {
        const Real* pat = pa.data() + t * s;
        const Real* pbt = pb.data() + t * s;
        const Real* ct = pr.c_out.data() + t * s;
        Real acc = 0;
        for (std::size_t k = 0; k < s; ++k) acc += ct[k] * (pat[k] * carry[k] + pbt[k]);
        y[t * c + ch] = acc + d[ch] * x[t * c + ch];
      }
    });
  }
  return y;
}

template <typename Real>
Tensor run_scan(const SsmParams& p, const Tensor& x, bool parallel, std::size_t block_size,
                int workers, ScanCache* cache) {
  const std::size_t n = x.extent(0);
  const std::vector<Real> xr = to_real<Real>(x);
  const Projections<Real> pr = project_inputs<Real>(p, xr, n);
  std::vector<Real> h_trace;
  std::vector<Real> y;
  if (parallel) {
    y = scan_parallel_impl<Real>(p, xr, n, pr, block_size, workers);
  } else {
    y = scan_seq_impl<Real>(p, xr, n, pr, cache ? &h_trace : nullptr);
  }
  if (cache) {
    cache->x = x;
    auto pack = [&](const std::vector<Real>& v, std::vector<std::size_t> shape) {
      std::vector<double> d(v.begin(), v.end());
      return Tensor(std::move(shape), std::move(d));
    };
    cache->z_delta = pack(pr.z_delta, {n, p.channels});
    cache->delta = pack(pr.delta, {n, p.channels});
    cache->b_in = pack(pr.b_in, {n, p.state_dim});
    cache->c_out = pack(pr.c_out, {n, p.state_dim});
    cache->h = pack(h_trace, {n, p.channels * p.state_dim});
    cache->valid = true;
  }
  std::vector<double> yd(y.begin(), y.end());
  Tensor out({n, p.channels}, std::move(yd), x.precision());
  out.check_finite("selective_scan");
  return out;
}

void check_scan_input(const SsmParams& p, const Tensor& x) {
  p.validate();
  if (x.rank() != 2 || x.extent(1) != p.channels) {
    throw InputError("scan input must be [N x C] with C = " + std::to_string(p.channels));
  }
}

}  // namespace

Tensor selective_scan_seq(const SsmParams& params, const Tensor& x, ScanCache* cache,
                          Precision precision) {
  check_scan_input(params, x);
  if (cache && precision != Precision::Double) {
    throw InputError("scan cache (backward pass) requires double precision");
  }
  if (precision == Precision::Single) return run_scan<float>(params, x, false, 0, 1, nullptr);
  return run_scan<double>(params, x, false, 0, 1, cache);
}

Tensor selective_scan_parallel(const SsmParams& params, const Tensor& x, Precision precision,
                               std::size_t block_size, int workers) {
  check_scan_input(params, x);
  if (precision == Precision::Single) {
    return run_scan<float>(params, x, true, block_size, workers, nullptr);
  }
  return run_scan<double>(params, x, true, block_size, workers, nullptr);
}

Tensor scan_backward(const SsmParams& params, const ScanCache& cache, const Tensor& upstream) {
  if (!cache.valid) throw InputError("scan_backward: cache is missing (run the forward first)");
  params.validate();
  const std::size_t n = cache.x.extent(0);
  const std::size_t c = params.channels, s = params.state_dim;
  if (upstream.rank() != 2 || upstream.extent(0) != n || upstream.extent(1) != c) {
    throw InputError("scan_backward: upstream shape mismatch");
  }

  Tensor grad({n, c});
  std::vector<double> carry(c * s, 0.0);  // dL/dh_t arriving from step t+1
  std::vector<double> g_delta(c), g_b(s), g_c(s);

  for (std::size_t t = n; t-- > 0;) {
    const double* g = upstream.data() + t * c;
    const double* bt = cache.b_in.data() + t * s;
    const double* ct = cache.c_out.data() + t * s;
    const double* ht = cache.h.data() + t * c * s;
    const double* hprev = t > 0 ? cache.h.data() + (t - 1) * c * s : nullptr;
    std::fill(g_delta.begin(), g_delta.end(), 0.0);
    std::fill(g_b.begin(), g_b.end(), 0.0);
    std::fill(g_c.begin(), g_c.end(), 0.0);

    for (std::size_t ch = 0; ch < c; ++ch) {
      const double dc = cache.delta[t * c + ch];
      const double xc = cache.x[t * c + ch];
      const double gy = g[ch];
      const double* ac = params.A.data() + ch * s;
      double* carry_c = carry.data() + ch * s;
      double gx = gy * params.D[ch];
      for (std::size_t k = 0; k < s; ++k) {
        const double gh = gy * ct[k] + carry_c[k];
        const double a_bar = std::exp(dc * ac[k]);
        const double hp = hprev ? hprev[ch * s + k] : 0.0;
        g_delta[ch] += gh * (ac[k] * a_bar * hp + bt[k] * xc);
        g_b[k] += gh * dc * xc;
        gx += gh * dc * bt[k];
        g_c[k] += gy * ht[ch * s + k];
        carry_c[k] = gh * a_bar;  // flows to h_{t-1}
      }
      grad[t * c + ch] = gx;
    }
    // selectivity projections: delta through softplus, B and C affine
    for (std::size_t ch = 0; ch < c; ++ch) {
      g_delta[ch] *= sigmoid(cache.z_delta[t * c + ch]);
    }
    for (std::size_t i = 0; i < c; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += g_delta[j] * params.w_delta[i * c + j];
      for (std::size_t k = 0; k < s; ++k) {
        acc += g_b[k] * params.w_b[i * s + k] + g_c[k] * params.w_c[i * s + k];
      }
      grad[t * c + i] += acc;
    }
  }
  grad.check_finite("scan_backward");
  return grad;
}

namespace {

Tensor reverse_rows(const Tensor& x) {
  const std::size_t n = x.extent(0), c = x.extent(1);
  Tensor out({n, c}, x.precision());
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < c; ++j) out[t * c + j] = x[(n - 1 - t) * c + j];
  }
  return out;
}

void check_concat_weight(const Tensor* w, std::size_t c) {
  if (w == nullptr) {
    throw InputError("bidirectional merge ConcatProject requires a [2C x C] weight");
  }
  if (w->rank() != 2 || w->extent(0) != 2 * c || w->extent(1) != c) {
    throw InputError("bidirectional concat weight must be [2C x C]");
  }
}

}  // namespace

Tensor bidirectional_scan(const SsmParams& params_fwd, const SsmParams& params_bwd,
                          const Tensor& x, MergeRule merge, BidirCache* cache,
                          const Tensor* concat_weight) {
  if (params_fwd.channels != params_bwd.channels || params_fwd.state_dim != params_bwd.state_dim) {
    throw InputError("bidirectional_scan: parameter sets must share (C, S)");
  }
  check_scan_input(params_fwd, x);
  const std::size_t n = x.extent(0), c = x.extent(1);
  Tensor y_f = selective_scan_seq(params_fwd, x, cache ? &cache->forward : nullptr);
  Tensor rx = reverse_rows(x);
  Tensor y_r = selective_scan_seq(params_bwd, rx, cache ? &cache->backward : nullptr);
  Tensor y_b = reverse_rows(y_r);
  if (cache) cache->valid = true;

  Tensor out({n, c}, x.precision());
  switch (merge) {
    case MergeRule::Mean:
      for (std::size_t i = 0; i < n * c; ++i) out[i] = 0.5 * (y_f[i] + y_b[i]);
      break;
    case MergeRule::Sum:
      for (std::size_t i = 0; i < n * c; ++i) out[i] = y_f[i] + y_b[i];
      break;
    case MergeRule::ConcatProject: {
      check_concat_weight(concat_weight, c);
      const Tensor& w = *concat_weight;
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < c; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < c; ++i) {
            acc += y_f[t * c + i] * w[i * c + j] + y_b[t * c + i] * w[(c + i) * c + j];
          }
          out[t * c + j] = acc;
        }
      }
      break;
    }
  }
  out.check_finite("bidirectional_scan");
  return out;
}

Tensor bidirectional_backward(const SsmParams& params_fwd, const SsmParams& params_bwd,
                              const BidirCache& cache, const Tensor& upstream, MergeRule merge,
                              const Tensor* concat_weight) {
  if (!cache.valid) throw InputError("bidirectional_backward: cache is missing");
  const std::size_t n = upstream.extent(0), c = upstream.extent(1);
  Tensor g_f({n, c}), g_b({n, c});
  switch (merge) {
    case MergeRule::Mean:
      for (std::size_t i = 0; i < n * c; ++i) {
        g_f[i] = 0.5 * upstream[i];
        g_b[i] = 0.5 * upstream[i];
      }
      break;
    case MergeRule::Sum:
      g_f = upstream;
      g_b = upstream;
      break;
    case MergeRule::ConcatProject: {
      check_concat_weight(concat_weight, c);
      const Tensor& w = *concat_weight;
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t i = 0; i < c; ++i) {
          double af = 0.0, ab = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            af += upstream[t * c + j] * w[i * c + j];
            ab += upstream[t * c + j] * w[(c + i) * c + j];
          }
          g_f[t * c + i] = af;
          g_b[t * c + i] = ab;
        }
      }
      break;
    }
  }
  Tensor grad = scan_backward(params_fwd, cache.forward, g_f);
  Tensor g_rev = scan_backward(params_bwd, cache.backward, reverse_rows(g_b));
  Tensor g_rerev = reverse_rows(g_rev);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g_rerev[i];
  return grad;
}

void save_params(const std::string& prefix, const SsmParams& params, std::uint64_t seed,
                 Precision precision) {
  params.validate();
  const std::pair<const char*, const Tensor*> entries[] = {
      {"A", &params.A},         {"D", &params.D},         {"w_delta", &params.w_delta},
      {"b_delta", &params.b_delta}, {"w_b", &params.w_b}, {"b_b", &params.b_b},
      {"w_c", &params.w_c},     {"b_c", &params.b_c}};
  for (const auto& [name, t] : entries) {
    save_tensor(prefix + "." + name + ".sfkt", *t);
  }
  std::ofstream os(prefix + ".manifest");
  if (!os) throw InputError("cannot write manifest for '" + prefix + "'");
  os << "C " << params.channels << "\n";
  os << "S " << params.state_dim << "\n";
  os << "precision " << precision_name(precision) << "\n";
  os << "seed " << seed << "\n";
}

SsmParams load_params(const std::string& prefix) {
  std::ifstream is(prefix + ".manifest");
  if (!is) throw InputError("cannot read manifest for '" + prefix + "'");
  SsmParams p;
  std::string key;
  std::string precision_label;
  std::uint64_t seed = 0;
  while (is >> key) {
    if (key == "C") is >> p.channels;
    else if (key == "S") is >> p.state_dim;
    else if (key == "precision") is >> precision_label;
    else if (key == "seed") is >> seed;
    else throw InputError("unknown manifest key '" + key + "'");
  }
  p.A = load_tensor(prefix + ".A.sfkt");
  p.D = load_tensor(prefix + ".D.sfkt");
  p.w_delta = load_tensor(prefix + ".w_delta.sfkt");
  p.b_delta = load_tensor(prefix + ".b_delta.sfkt");
  p.w_b = load_tensor(prefix + ".w_b.sfkt");
  p.b_b = load_tensor(prefix + ".b_b.sfkt");
  p.w_c = load_tensor(prefix + ".w_c.sfkt");
  p.b_c = load_tensor(prefix + ".b_c.sfkt");
  p.validate();
  return p;
}

}  // namespace sfkit
