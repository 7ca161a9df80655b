#include <cmath>
#include <random>

#include "editroom/diffusion.hpp"

namespace editroom {

using RowMat = DenoiserParams::RowMat;
using CView = DenoiserParams::ConstView;
using GView = DenoiserParams::View;

void DenoiserConfig::validate() const {
  if (vocab.max_nodes < 2 || vocab.categories < 1 || vocab.feature_slots < 1 || vocab.codebook < 1)
    throw ValidationError("invalid graph vocabulary");
  if (hidden < 1 || layers < 1 || heads < 1 || hidden % heads != 0)
    throw ValidationError("hidden width must be a positive multiple of heads");
  if (text_tokens < 2 || text_dim < 1) throw ValidationError("invalid text feature shape");
  if (steps < 1) throw ValidationError("diffusion steps must be >= 1");
  if (!(layout_scale > 0.0) || !std::isfinite(layout_scale)) throw ValidationError("layout_scale must be positive");
}

void DenoiserParams::add(const std::string& name, int rows, int cols) {
  tensors_.push_back({name, rows, cols, values.size()});
  values.resize(values.size() + static_cast<std::size_t>(rows) * cols, 0.0);
}

const TensorInfo& DenoiserParams::info(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw ValidationError("unknown parameter tensor '" + name + "'");
}

DenoiserParams::View DenoiserParams::view(std::vector<double>& storage, const std::string& name) const {
  const auto& t = info(name);
  return View(storage.data() + t.offset, t.rows, t.cols);
}

DenoiserParams::ConstView DenoiserParams::view(const std::vector<double>& storage, const std::string& name) const {
  const auto& t = info(name);
  return ConstView(storage.data() + t.offset, t.rows, t.cols);
}

bool DenoiserParams::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

std::string L(int l, const char* what) { return "l" + std::to_string(l) + "." + what; }
std::string S(const char* what, int s) { return std::string(what) + std::to_string(s); }

}  // namespace

DenoiserParams DenoiserParams::init(const DenoiserConfig& config, std::uint64_t seed) {
  config.validate();
  DenoiserParams p;
  p.config_ = config;
  const int d = config.hidden;
  const auto& v = config.vocab;
  const bool graph = config.kind == DenoiserKind::Graph;
  p.add("emb.cat", v.categories + 2, d);
  for (int s = 0; s < v.feature_slots; ++s) p.add(S("emb.feat", s), v.codebook + 2, d);
  p.add("emb.type", 2, d);
  p.add("emb.match", config.text_tokens, d);
  p.add("time.w", d, d);
  p.add("time.b", 1, d);
  if (!graph) {
    p.add("lay.src", 8, d);
    p.add("lay.x", 8, d);
    p.add("lay.ctx", 8, d);
  }
  for (int l = 0; l < config.layers; ++l) {
    for (const char* n : {"ln1.g", "ln1.b"}) p.add(L(l, n), 1, d);
    for (const char* n : {"wq", "wk", "wv", "wo"}) p.add(L(l, n), d, d);
    p.add(L(l, "bo"), 1, d);
    p.add(L(l, "relk"), kAttentionRelations, d);
    p.add(L(l, "relv"), kAttentionRelations, d);
    for (const char* n : {"ln2.g", "ln2.b"}) p.add(L(l, n), 1, d);
    p.add(L(l, "cq"), d, d);
    p.add(L(l, "ck"), config.text_dim, d);
    p.add(L(l, "cv"), config.text_dim, d);
    p.add(L(l, "co"), d, d);
    p.add(L(l, "cbo"), 1, d);
    for (const char* n : {"ln3.g", "ln3.b"}) p.add(L(l, n), 1, d);
    p.add(L(l, "f1"), d, 2 * d);
    p.add(L(l, "fb1"), 1, 2 * d);
    p.add(L(l, "f2"), 2 * d, d);
    p.add(L(l, "fb2"), 1, d);
  }
  p.add("out.ln.g", 1, d);
  p.add("out.ln.b", 1, d);
  if (graph) {
    p.add("head.cat", d, v.categories + 1);
    p.add("head.cat.b", 1, v.categories + 1);
    for (int s = 0; s < v.feature_slots; ++s) {
      p.add(S("head.feat", s), d, v.codebook + 1);
      p.add(S("head.featb", s), 1, v.codebook + 1);
    }
    p.add("edge.p", d, d);
    p.add("edge.q", d, d);
    p.add("edge.src", kNumRelations, d);
    p.add("edge.b", 1, d);
    p.add("edge.w", d, kNumRelations);
    p.add("edge.wb", 1, kNumRelations);
  } else {
    p.add("head.eps", d, 8);
    p.add("head.eps.b", 1, 8);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (const auto& t : p.tensors_) {
    const std::string& name = t.name;
    const bool is_bias = name.ends_with(".b") || name.ends_with("bo") || name.ends_with("fb1") ||
                         name.ends_with("fb2") || name.ends_with(".wb") || name.find("featb") != std::string::npos;
    auto view = p.view(name);
    if (name.ends_with(".g")) {
      view.setOnes();
    } else if (!is_bias) {
      // Embedding tables and relation rows use 1/sqrt(d); projections use 1/sqrt(fan_in).
      const bool table = name.starts_with("emb.") || name.ends_with("relk") || name.ends_with("relv") ||
                         name == "edge.src";
      const double sd = 1.0 / std::sqrt(static_cast<double>(table ? d : t.rows));
      for (Eigen::Index i = 0; i < view.size(); ++i) view.data()[i] = sd * n(rng);
    }
  }
  return p;
}

namespace {

constexpr double kLnEps = 1e-5;

struct LnCache {
  RowMat xhat;
  Eigen::VectorXd inv;
};

RowMat ln_forward(const RowMat& x, const CView& g, const CView& b, LnCache& c) {
  const Eigen::Index n = x.rows(), d = x.cols();
  c.xhat.resize(n, d);
  c.inv.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    c.inv[i] = 1.0 / std::sqrt(var + kLnEps);
    c.xhat.row(i) = (x.row(i).array() - mu) * c.inv[i];
  }
  RowMat y = c.xhat.array().rowwise() * g.row(0).array();
  y.rowwise() += b.row(0);
  return y;
}

RowMat ln_backward(const RowMat& dy, const CView& g, const LnCache& c, GView dg, GView db) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  dg.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  RowMat dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd dxh = dy.row(i).array() * g.row(0).array();
    const double m1 = dxh.mean();
    const double m2 = (dxh.array() * c.xhat.row(i).array()).mean();
    dx.row(i) = c.inv[i] * (dxh.array() - m1 - c.xhat.row(i).array() * m2);
  }
  return dx;
}

void softmax_rows(RowMat& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

// dS = P * (dP - rowsum(dP * P))
RowMat softmax_rows_backward(const RowMat& p, const RowMat& dp) {
  RowMat ds = p.array() * dp.array();
  const Eigen::VectorXd dot = ds.rowwise().sum();
  ds.array() -= p.array().colwise() * dot.array();
  return ds;
}

int invert_edge(int v) {
  return v >= 0 && v < kNumRelations ? static_cast<int>(invert_relation(static_cast<SpatialRelation>(v))) : v;
}

int pair_edge(const DiscreteState& s, int i, int j, int m) {
  return i < j ? s.edges[edge_index(i, j, m)] : invert_edge(s.edges[edge_index(j, i, m)]);
}

Eigen::RowVectorXd sinusoid(int t, int d) {
  Eigen::RowVectorXd e(d);
  for (int k = 0; k < d; ++k) {
    const double freq = std::pow(10000.0, -2.0 * (k / 2) / d);
    e[k] = (k % 2 == 0) ? std::sin(t * freq) : std::cos(t * freq);
  }
  return e;
}

struct NetInputs {
  const DiscreteState* source = nullptr;
  const DiscreteState* target = nullptr;  // noisy graph (graph kind) or target graph (layout kind)
  const TextFeature* text = nullptr;
  int t = 1;
  const Eigen::MatrixXd* source_layout = nullptr;  // layout kind only
  const Eigen::MatrixXd* x_t = nullptr;            // layout kind only
};

struct LayerCache {
  RowMat h_in;
  LnCache ln1, ln2, ln3;
  RowMat a, q, k, v;
  std::vector<RowMat> p, pr;  // per head: N x N attention, N x R relation mass
  RowMat o;
  RowMat h1;
  RowMat b, qc, kc, vc;
  std::vector<RowMat> pc;
  RowMat oc;
  RowMat h2;
  RowMat c, z;
};

struct Forward {
  std::vector<int> rel;  // N x N relation types, row-major
  Eigen::RowVectorXd tsin;
  std::vector<LayerCache> layers;
  RowMat h_last;
  LnCache ln_out;
  RowMat hf;  // N x d after final LayerNorm
};

class Net {
public:
  explicit Net(const DenoiserParams& p) : p_(p), c_(p.config()), m_(c_.vocab.max_nodes), d_(c_.hidden) {}

  void check(const NetInputs& in) const {
    const auto& v = c_.vocab;
    auto check_state = [&](const DiscreteState& s) {
      if (static_cast<int>(s.categories.size()) != m_ || static_cast<int>(s.features.size()) != m_ ||
          static_cast<int>(s.edges.size()) != v.edge_count())
        throw ValidationError("graph state shape does not match the denoiser");
      for (const auto& f : s.features)
        if (static_cast<int>(f.size()) != v.feature_slots) throw ValidationError("feature slot count mismatch");
      for (int c : s.categories)
        if (c < 0 || c > v.mask_category()) throw ValidationError("category token out of range");
      for (const auto& f : s.features)
        for (int x : f)
          if (x < 0 || x > v.mask_feature()) throw ValidationError("feature token out of range");
      for (int e : s.edges)
        if (e < 0 || e > GraphVocab::kMaskEdge) throw ValidationError("edge token out of range");
    };
    check_state(*in.source);
    check_state(*in.target);
    if (in.text->tokens() != c_.text_tokens || in.text->dim() != c_.text_dim)
      throw ValidationError("text feature shape does not match the denoiser");
    if (in.text->slot_match.size() != 0 &&
        (in.text->slot_match.rows() != m_ || in.text->slot_match.cols() != c_.text_tokens))
      throw ValidationError("slot match must be M x k");
    if (in.t < 1 || in.t > c_.steps) throw ValidationError("diffusion step out of range");
    if (c_.kind == DenoiserKind::Layout) {
      if (!in.source_layout || !in.x_t || in.source_layout->rows() != m_ || in.source_layout->cols() != 8 ||
          in.x_t->rows() != m_ || in.x_t->cols() != 8)
        throw ValidationError("layout inputs must be M x 8");
    }
  }

  RowMat forward(const NetInputs& in, Forward& f) const {
    const int n = 2 * m_;
    build_relations(in, f.rel);
    f.tsin = sinusoid(in.t, d_);
    RowMat h = embed(in, f.tsin);
    f.layers.resize(c_.layers);
    for (int l = 0; l < c_.layers; ++l) h = layer_forward(l, h, *in.text, f.rel, f.layers[l]);
    f.h_last = h;
    f.hf = ln_forward(h, V("out.ln.g"), V("out.ln.b"), f.ln_out);
    (void)n;
    return f.hf;
  }

  void backward(const NetInputs& in, const Forward& f, const RowMat& dhf, std::vector<double>& grad) const {
    RowMat dh = ln_backward(dhf, V("out.ln.g"), f.ln_out, G(grad, "out.ln.g"), G(grad, "out.ln.b"));
    for (int l = c_.layers - 1; l >= 0; --l) dh = layer_backward(l, dh, *in.text, f.rel, f.layers[l], grad);
    embed_backward(in, f.tsin, dh, grad);
  }

  CView V(const std::string& name) const { return p_.view(name); }
  GView G(std::vector<double>& g, const std::string& name) const { return p_.view(g, name); }

private:
  void build_relations(const NetInputs& in, std::vector<int>& rel) const {
    const int n = 2 * m_;
    rel.assign(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        int r;
        const bool si = i < m_, sj = j < m_;
        const int a = si ? i : i - m_, b = sj ? j : j - m_;
        if (i == j) r = 0;
        else if (si && sj) r = 1 + pair_edge(*in.source, a, b, m_);
        else if (!si && !sj) r = 12 + pair_edge(*in.target, a, b, m_);
        else if (si) r = a == b ? 24 : 25;
        else r = a == b ? 26 : 27;
        rel[static_cast<std::size_t>(i) * n + j] = r;
      }
  }

  static bool has_match(const NetInputs& in) { return in.text->slot_match.size() != 0; }

  RowMat embed(const NetInputs& in, const Eigen::RowVectorXd& tsin) const {
    const int n = 2 * m_;
    RowMat x = RowMat::Zero(n, d_);
    const auto cat = V("emb.cat");
    const auto type = V("emb.type");
    const Eigen::RowVectorXd tau = tsin * V("time.w") + V("time.b").row(0);
    for (int i = 0; i < n; ++i) {
      const bool src = i < m_;
      const DiscreteState& s = src ? *in.source : *in.target;
      const int slot = src ? i : i - m_;
      x.row(i) = cat.row(s.categories[slot]) + type.row(src ? 0 : 1);
      for (int k = 0; k < c_.vocab.feature_slots; ++k) x.row(i) += V(S("emb.feat", k)).row(s.features[slot][k]);
      if (!src) x.row(i) += tau;
      if (src && has_match(in)) x.row(i) += in.text->slot_match.row(slot) * V("emb.match");
      if (c_.kind == DenoiserKind::Layout) {
        if (src) x.row(i) += in.source_layout->row(slot) * V("lay.src");
        else x.row(i) += in.x_t->row(slot) * V("lay.x") + in.source_layout->row(slot) * V("lay.ctx");
      }
    }
    return x;
  }

  void embed_backward(const NetInputs& in, const Eigen::RowVectorXd& tsin, const RowMat& dx,
                      std::vector<double>& grad) const {
    const int n = 2 * m_;
    auto gcat = G(grad, "emb.cat");
    auto gtype = G(grad, "emb.type");
    Eigen::RowVectorXd dtau = Eigen::RowVectorXd::Zero(d_);
    for (int i = 0; i < n; ++i) {
      const bool src = i < m_;
      const DiscreteState& s = src ? *in.source : *in.target;
      const int slot = src ? i : i - m_;
      gcat.row(s.categories[slot]) += dx.row(i);
      gtype.row(src ? 0 : 1) += dx.row(i);
      for (int k = 0; k < c_.vocab.feature_slots; ++k) G(grad, S("emb.feat", k)).row(s.features[slot][k]) += dx.row(i);
      if (!src) dtau += dx.row(i);
      if (src && has_match(in)) G(grad, "emb.match") += in.text->slot_match.row(slot).transpose() * dx.row(i);
      if (c_.kind == DenoiserKind::Layout) {
        if (src) {
          G(grad, "lay.src") += in.source_layout->row(slot).transpose() * dx.row(i);
        } else {
          G(grad, "lay.x") += in.x_t->row(slot).transpose() * dx.row(i);
          G(grad, "lay.ctx") += in.source_layout->row(slot).transpose() * dx.row(i);
        }
      }
    }
    G(grad, "time.w") += tsin.transpose() * dtau;
    G(grad, "time.b").row(0) += dtau;
  }

  RowMat layer_forward(int l, const RowMat& h, const TextFeature& text, const std::vector<int>& rel,
                       LayerCache& c) const {
    const int n = 2 * m_;
    const int H = c_.heads, dk = d_ / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    c.h_in = h;
    c.a = ln_forward(h, V(L(l, "ln1.g")), V(L(l, "ln1.b")), c.ln1);
    c.q = c.a * V(L(l, "wq"));
    c.k = c.a * V(L(l, "wk"));
    c.v = c.a * V(L(l, "wv"));
    const auto relk = V(L(l, "relk"));
    const auto relv = V(L(l, "relv"));
    c.p.assign(H, RowMat());
    c.pr.assign(H, RowMat());
    c.o.resize(n, d_);
    for (int hd = 0; hd < H; ++hd) {
      const auto qh = c.q.middleCols(hd * dk, dk);
      const RowMat qr = qh * relk.middleCols(hd * dk, dk).transpose();  // N x R
      RowMat s = qh * c.k.middleCols(hd * dk, dk).transpose();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s(i, j) += qr(i, rel[static_cast<std::size_t>(i) * n + j]);
      s *= scale;
      softmax_rows(s);
      RowMat pr = RowMat::Zero(n, kAttentionRelations);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) pr(i, rel[static_cast<std::size_t>(i) * n + j]) += s(i, j);
      c.o.middleCols(hd * dk, dk) = s * c.v.middleCols(hd * dk, dk) + pr * relv.middleCols(hd * dk, dk);
      c.p[hd] = std::move(s);
      c.pr[hd] = std::move(pr);
    }
    c.h1 = h + c.o * V(L(l, "wo"));
    c.h1.rowwise() += V(L(l, "bo")).row(0);

    c.b = ln_forward(c.h1, V(L(l, "ln2.g")), V(L(l, "ln2.b")), c.ln2);
    const RowMat tv = text.vectors;
    c.qc = c.b * V(L(l, "cq"));
    c.kc = tv * V(L(l, "ck"));
    c.vc = tv * V(L(l, "cv"));
    c.pc.assign(H, RowMat());
    c.oc.resize(n, d_);
    for (int hd = 0; hd < H; ++hd) {
      RowMat s = c.qc.middleCols(hd * dk, dk) * c.kc.middleCols(hd * dk, dk).transpose() * scale;
      softmax_rows(s);
      c.oc.middleCols(hd * dk, dk) = s * c.vc.middleCols(hd * dk, dk);
      c.pc[hd] = std::move(s);
    }
    c.h2 = c.h1 + c.oc * V(L(l, "co"));
    c.h2.rowwise() += V(L(l, "cbo")).row(0);

    c.c = ln_forward(c.h2, V(L(l, "ln3.g")), V(L(l, "ln3.b")), c.ln3);
    c.z = c.c * V(L(l, "f1"));
    c.z.rowwise() += V(L(l, "fb1")).row(0);
    const RowMat g = c.z.cwiseMax(0.0);
    RowMat out = c.h2 + g * V(L(l, "f2"));
    out.rowwise() += V(L(l, "fb2")).row(0);
    return out;
  }

  RowMat layer_backward(int l, const RowMat& dout, const TextFeature& text, const std::vector<int>& rel,
                        const LayerCache& c, std::vector<double>& grad) const {
    const int n = 2 * m_;
    const int H = c_.heads, dk = d_ / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    // Feed-forward.
    const RowMat g = c.z.cwiseMax(0.0);
    G(grad, L(l, "f2")) += g.transpose() * dout;
    G(grad, L(l, "fb2")).row(0) += dout.colwise().sum();
    RowMat dz = dout * V(L(l, "f2")).transpose();
    dz = (c.z.array() > 0.0).select(dz, 0.0);
    G(grad, L(l, "f1")) += c.c.transpose() * dz;
    G(grad, L(l, "fb1")).row(0) += dz.colwise().sum();
    const RowMat dc = dz * V(L(l, "f1")).transpose();
    RowMat dh2 = dout + ln_backward(dc, V(L(l, "ln3.g")), c.ln3, G(grad, L(l, "ln3.g")), G(grad, L(l, "ln3.b")));

    // Cross-attention.
    G(grad, L(l, "co")) += c.oc.transpose() * dh2;
    G(grad, L(l, "cbo")).row(0) += dh2.colwise().sum();
    const RowMat doc = dh2 * V(L(l, "co")).transpose();
    RowMat dqc(n, d_), dkc(c.kc.rows(), d_), dvc(c.vc.rows(), d_);
    for (int hd = 0; hd < H; ++hd) {
      const auto dO = doc.middleCols(hd * dk, dk);
      const RowMat& p = c.pc[hd];
      dvc.middleCols(hd * dk, dk) = p.transpose() * dO;
      const RowMat dp = dO * c.vc.middleCols(hd * dk, dk).transpose();
      const RowMat ds = softmax_rows_backward(p, dp) * scale;
      dqc.middleCols(hd * dk, dk) = ds * c.kc.middleCols(hd * dk, dk);
      dkc.middleCols(hd * dk, dk) = ds.transpose() * c.qc.middleCols(hd * dk, dk);
    }
    const RowMat tv = text.vectors;
    G(grad, L(l, "cq")) += c.b.transpose() * dqc;
    G(grad, L(l, "ck")) += tv.transpose() * dkc;
    G(grad, L(l, "cv")) += tv.transpose() * dvc;
    const RowMat db = dqc * V(L(l, "cq")).transpose();
    RowMat dh1 = dh2 + ln_backward(db, V(L(l, "ln2.g")), c.ln2, G(grad, L(l, "ln2.g")), G(grad, L(l, "ln2.b")));

    // Relation-aware self-attention.
    G(grad, L(l, "wo")) += c.o.transpose() * dh1;
    G(grad, L(l, "bo")).row(0) += dh1.colwise().sum();
    const RowMat dob = dh1 * V(L(l, "wo")).transpose();
    const auto relk = V(L(l, "relk"));
    const auto relv = V(L(l, "relv"));
    auto grelk = G(grad, L(l, "relk"));
    auto grelv = G(grad, L(l, "relv"));
    RowMat dq(n, d_), dkm(n, d_), dv(n, d_);
    for (int hd = 0; hd < H; ++hd) {
      const auto dO = dob.middleCols(hd * dk, dk);
      const RowMat& p = c.p[hd];
      dv.middleCols(hd * dk, dk) = p.transpose() * dO;
      grelv.middleCols(hd * dk, dk) += c.pr[hd].transpose() * dO;
      RowMat dp = dO * c.v.middleCols(hd * dk, dk).transpose();
      const RowMat dor = dO * relv.middleCols(hd * dk, dk).transpose();  // N x R
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dp(i, j) += dor(i, rel[static_cast<std::size_t>(i) * n + j]);
      const RowMat ds = softmax_rows_backward(p, dp) * scale;
      RowMat dsr = RowMat::Zero(n, kAttentionRelations);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dsr(i, rel[static_cast<std::size_t>(i) * n + j]) += ds(i, j);
      const auto qh = c.q.middleCols(hd * dk, dk);
      dq.middleCols(hd * dk, dk) = ds * c.k.middleCols(hd * dk, dk) + dsr * relk.middleCols(hd * dk, dk);
      dkm.middleCols(hd * dk, dk) = ds.transpose() * qh;
      grelk.middleCols(hd * dk, dk) += dsr.transpose() * qh;
    }
    G(grad, L(l, "wq")) += c.a.transpose() * dq;
    G(grad, L(l, "wk")) += c.a.transpose() * dkm;
    G(grad, L(l, "wv")) += c.a.transpose() * dv;
    const RowMat da = dq * V(L(l, "wq")).transpose() + dkm * V(L(l, "wk")).transpose() +
                      dv * V(L(l, "wv")).transpose();
    return dh1 + ln_backward(da, V(L(l, "ln1.g")), c.ln1, G(grad, L(l, "ln1.g")), G(grad, L(l, "ln1.b")));
  }

  const DenoiserParams& p_;
  const DenoiserConfig& c_;
  int m_;
  int d_;
};

// Edge logits are read both ways: pair (i, j) scores r from the forward view and
// invert(r) from the reversed view, so swapping slots inverts the prediction.
struct EdgeCache {
  std::vector<std::pair<int, int>> pairs;
  RowMat u_fwd;  // E x d pre-activations, (i, j) view
  RowMat u_rev;  // (j, i) view with the inverted source relation
};

RowMat invert_columns(const RowMat& x) {
  RowMat y(x.rows(), x.cols());
  for (int r = 0; r < kNumRelations; ++r) y.col(invert_edge(r)) = x.col(r);
  return y;
}

GraphLogits graph_heads(const Net& net, const DenoiserParams& p, const RowMat& hf, const DiscreteState& source,
                        EdgeCache* cache) {
  const auto& v = p.config().vocab;
  const int m = v.max_nodes;
  const RowMat ht = hf.bottomRows(m);
  GraphLogits out;
  RowMat cat = ht * net.V("head.cat");
  cat.rowwise() += net.V("head.cat.b").row(0);
  out.categories = cat;
  for (int s = 0; s < v.feature_slots; ++s) {
    RowMat f = ht * net.V(S("head.feat", s));
    f.rowwise() += net.V(S("head.featb", s)).row(0);
    out.features.push_back(f);
  }
  const RowMat hp = ht * net.V("edge.p");
  const RowMat hq = ht * net.V("edge.q");
  const auto esrc = net.V("edge.src");
  const auto eb = net.V("edge.b").row(0);
  RowMat uf(v.edge_count(), p.config().hidden), ur(v.edge_count(), p.config().hidden);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const auto e = static_cast<Eigen::Index>(edge_index(i, j, m));
      uf.row(e) = hp.row(i) + hq.row(j) + esrc.row(source.edges[e]) + eb;
      ur.row(e) = hp.row(j) + hq.row(i) + esrc.row(invert_edge(source.edges[e])) + eb;
      pairs.emplace_back(i, j);
    }
  const auto w = net.V("edge.w");
  RowMat el = uf.cwiseMax(0.0) * w + invert_columns(ur.cwiseMax(0.0) * w);
  const RowMat wb = net.V("edge.wb");
  el.rowwise() += (wb + invert_columns(wb)).row(0);
  out.edges = el;
  if (cache) {
    cache->pairs = std::move(pairs);
    cache->u_fwd = std::move(uf);
    cache->u_rev = std::move(ur);
  }
  return out;
}

RowMat graph_heads_backward(const Net& net, const DenoiserParams& p, const RowMat& hf, const DiscreteState& source,
                            const EdgeCache& cache, const GraphLogits& dl, std::vector<double>& grad) {
  const auto& v = p.config().vocab;
  const int m = v.max_nodes;
  const RowMat ht = hf.bottomRows(m);
  const RowMat dcat = dl.categories;
  net.G(grad, "head.cat") += ht.transpose() * dcat;
  net.G(grad, "head.cat.b").row(0) += dcat.colwise().sum();
  RowMat dht = dcat * net.V("head.cat").transpose();
  for (int s = 0; s < v.feature_slots; ++s) {
    const RowMat df = dl.features[s];
    net.G(grad, S("head.feat", s)) += ht.transpose() * df;
    net.G(grad, S("head.featb", s)).row(0) += df.colwise().sum();
    dht += df * net.V(S("head.feat", s)).transpose();
  }
  const RowMat de = dl.edges;
  const RowMat de_inv = invert_columns(de);
  const RowMat zf = cache.u_fwd.cwiseMax(0.0);
  const RowMat zr = cache.u_rev.cwiseMax(0.0);
  const auto w = net.V("edge.w");
  net.G(grad, "edge.w") += zf.transpose() * de + zr.transpose() * de_inv;
  net.G(grad, "edge.wb").row(0) += de.colwise().sum() + de_inv.colwise().sum();
  RowMat duf = de * w.transpose();
  duf = (cache.u_fwd.array() > 0.0).select(duf, 0.0);
  RowMat dur = de_inv * w.transpose();
  dur = (cache.u_rev.array() > 0.0).select(dur, 0.0);
  RowMat dhp = RowMat::Zero(m, p.config().hidden), dhq = RowMat::Zero(m, p.config().hidden);
  auto gsrc = net.G(grad, "edge.src");
  for (const auto& [i, j] : cache.pairs) {
    const auto e = static_cast<Eigen::Index>(edge_index(i, j, m));
    dhp.row(i) += duf.row(e);
    dhq.row(j) += duf.row(e);
    dhp.row(j) += dur.row(e);
    dhq.row(i) += dur.row(e);
    gsrc.row(source.edges[e]) += duf.row(e);
    gsrc.row(invert_edge(source.edges[e])) += dur.row(e);
  }
  net.G(grad, "edge.b").row(0) += duf.colwise().sum() + dur.colwise().sum();
  net.G(grad, "edge.p") += ht.transpose() * dhp;
  net.G(grad, "edge.q") += ht.transpose() * dhq;
  dht += dhp * net.V("edge.p").transpose() + dhq * net.V("edge.q").transpose();
  RowMat dhf = RowMat::Zero(hf.rows(), hf.cols());
  dhf.bottomRows(m) = dht;
  return dhf;
}

void require_kind(const DenoiserParams& p, DenoiserKind k) {
  if (p.config().kind != k)
    throw ValidationError(k == DenoiserKind::Graph ? "expected graph denoiser parameters"
                                                   : "expected layout denoiser parameters");
}

void check_batch(std::span<const EditExample> batch) {
  if (batch.empty()) throw ValidationError("empty batch");
}

// The head predicts v = a eps - s x0; eps_hat = s x_t + a v keeps the
// identity part of the noise estimate out of the network.
std::pair<double, double> layout_coefficients(const NoiseSchedule& schedule, int t) {
  const double ab = schedule.alpha_bar(t);
  return {std::sqrt(ab), std::sqrt(1.0 - ab)};
}

}  // namespace

GraphLogits denoise_graph(const DiscreteState& x_t, const DiscreteState& source, const TextFeature& text, int t,
                          const DenoiserParams& params) {
  require_kind(params, DenoiserKind::Graph);
  Net net(params);
  NetInputs in{&source, &x_t, &text, t, nullptr, nullptr};
  net.check(in);
  Forward f;
  const RowMat hf = net.forward(in, f);
  return graph_heads(net, params, hf, source, nullptr);
}

Eigen::MatrixXd denoise_layout(const Eigen::MatrixXd& x_t, const DiscreteState& target_graph,
                               const DiscreteState& source_graph, const Eigen::MatrixXd& source_layout,
                               const TextFeature& text, int t, const DenoiserParams& params) {
  require_kind(params, DenoiserKind::Layout);
  Net net(params);
  NetInputs in{&source_graph, &target_graph, &text, t, &source_layout, &x_t};
  net.check(in);
  Forward f;
  const RowMat hf = net.forward(in, f);
  RowMat v = hf.bottomRows(params.config().vocab.max_nodes) * net.V("head.eps");
  v.rowwise() += net.V("head.eps.b").row(0);
  const auto [a, s] = layout_coefficients(NoiseSchedule::linear(params.config().steps), t);
  return s * x_t + a * Eigen::MatrixXd(v);
}

LossResult loss_graph(std::span<const EditExample> batch, const DenoiserParams& params, const NoiseSchedule& schedule,
                      Rng& rng, GraphObjective objective, bool want_grad) {
  require_kind(params, DenoiserKind::Graph);
  check_batch(batch);
  const auto& v = params.config().vocab;
  const int m = v.max_nodes;
  std::uniform_int_distribution<int> tdist(1, schedule.T);
  std::vector<int> ts;
  std::vector<DiscreteState> noisy;
  long total = 0;
  for (const auto& ex : batch) {
    const int t = tdist(rng);
    ts.push_back(t);
    noisy.push_back(q_sample_discrete(ex.target, t, schedule, v, rng));
    const auto& x = noisy.back();
    const int a = ex.target.active;
    for (int i = 0; i < a; ++i) {
      total += x.categories[i] == v.mask_category();
      for (int f : x.features[i]) total += f == v.mask_feature();
      for (int j = i + 1; j < a; ++j) total += x.edges[edge_index(i, j, m)] == GraphVocab::kMaskEdge;
    }
  }
  LossResult res;
  res.count = total;
  if (want_grad) res.grad.assign(params.size(), 0.0);
  if (total == 0) return res;
  const double inv = 1.0 / static_cast<double>(total);

  Net net(params);
  std::vector<int> xt_tok, x0_tok;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    const auto& x = noisy[b];
    const int t = ts[b];
    const int a = ex.target.active;
    NetInputs in{&ex.source, &x, &ex.text, t, nullptr, nullptr};
    net.check(in);
    Forward f;
    const RowMat hf = net.forward(in, f);
    EdgeCache ec;
    const GraphLogits lg = graph_heads(net, params, hf, ex.source, &ec);
    GraphLogits dl;
    dl.categories = Eigen::MatrixXd::Zero(lg.categories.rows(), lg.categories.cols());
    for (const auto& fm : lg.features) dl.features.push_back(Eigen::MatrixXd::Zero(fm.rows(), fm.cols()));
    dl.edges = Eigen::MatrixXd::Zero(lg.edges.rows(), lg.edges.cols());

    xt_tok.assign(x.categories.begin(), x.categories.begin() + a);
    x0_tok.assign(ex.target.categories.begin(), ex.target.categories.begin() + a);
    res.loss += token_loss(xt_tok, x0_tok, lg.categories, v.mask_category(), t, schedule, objective,
                           want_grad ? &dl.categories : nullptr).first;
    for (int s = 0; s < v.feature_slots; ++s) {
      xt_tok.clear();
      x0_tok.clear();
      for (int i = 0; i < a; ++i) {
        xt_tok.push_back(x.features[i][s]);
        x0_tok.push_back(ex.target.features[i][s]);
      }
      res.loss += token_loss(xt_tok, x0_tok, lg.features[s], v.mask_feature(), t, schedule, objective,
                             want_grad ? &dl.features[s] : nullptr).first;
    }
    // Edges are scored one row at a time.
    for (int i = 0; i < a; ++i)
      for (int j = i + 1; j < a; ++j) {
        const auto e = static_cast<Eigen::Index>(edge_index(i, j, m));
        const int xt1[1] = {x.edges[e]};
        const int x01[1] = {ex.target.edges[e]};
        Eigen::MatrixXd row = lg.edges.row(e);
        Eigen::MatrixXd drow = Eigen::MatrixXd::Zero(1, row.cols());
        res.loss += token_loss(xt1, x01, row, GraphVocab::kMaskEdge, t, schedule, objective,
                               want_grad ? &drow : nullptr).first;
        if (want_grad) dl.edges.row(e) = drow;
      }
    if (!want_grad) continue;
    dl.categories *= inv;
    for (auto& fm : dl.features) fm *= inv;
    dl.edges *= inv;
    const RowMat dhf = graph_heads_backward(net, params, hf, ex.source, ec, dl, res.grad);
    net.backward(in, f, dhf, res.grad);
  }
  res.loss *= inv;
  return res;
}

LossResult loss_layout(std::span<const EditExample> batch, const DenoiserParams& params, const NoiseSchedule& schedule,
                       Rng& rng, bool want_grad) {
  require_kind(params, DenoiserKind::Layout);
  check_batch(batch);
  const int m = params.config().vocab.max_nodes;
  std::uniform_int_distribution<int> tdist(1, schedule.T);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<int> ts;
  std::vector<Eigen::MatrixXd> eps, xts;
  long total = 0;
  for (const auto& ex : batch) {
    const int t = tdist(rng);
    ts.push_back(t);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, 8);
    for (int i = 0; i < m; ++i)
      if (ex.target_rows[i]) {
        for (int c = 0; c < 8; ++c) e(i, c) = n01(rng);
        total += 8;
      }
    xts.push_back(q_sample_layout(ex.layout_residual() * params.config().layout_scale, t, e, schedule, ex.target_rows));
    eps.push_back(std::move(e));
  }
  LossResult res;
  res.count = total;
  if (want_grad) res.grad.assign(params.size(), 0.0);
  if (total == 0) return res;
  const double inv = 1.0 / static_cast<double>(total);

  Net net(params);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    NetInputs in{&ex.source, &ex.target, &ex.text, ts[b], &ex.source_layout, &xts[b]};
    net.check(in);
    Forward f;
    const RowMat hf = net.forward(in, f);
    RowMat pred = hf.bottomRows(m) * net.V("head.eps");
    pred.rowwise() += net.V("head.eps.b").row(0);
    const auto [a, s] = layout_coefficients(schedule, ts[b]);
    pred = s * xts[b] + a * pred;
    RowMat dpred = RowMat::Zero(m, 8);
    for (int i = 0; i < m; ++i) {
      if (!ex.target_rows[i]) continue;
      const Eigen::RowVectorXd diff = pred.row(i) - eps[b].row(i);
      res.loss += diff.squaredNorm();
      dpred.row(i) = 2.0 * a * inv * diff;
    }
    if (!want_grad) continue;
    net.G(res.grad, "head.eps") += hf.bottomRows(m).transpose() * dpred;
    net.G(res.grad, "head.eps.b").row(0) += dpred.colwise().sum();
    RowMat dhf = RowMat::Zero(hf.rows(), hf.cols());
    dhf.bottomRows(m) = dpred * net.V("head.eps").transpose();
    net.backward(in, f, dhf, res.grad);
  }
  res.loss *= inv;
  return res;
}

}  // namespace editroom
