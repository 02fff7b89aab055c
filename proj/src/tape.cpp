#include "dstqa/tape.hpp"

#include <cmath>

#include "dstqa/errors.hpp"

namespace dstqa {
namespace {

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok)
    throw ShapeError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

Matrix sigmoid_of(const Matrix& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

Parameter& ParameterStore::add(const std::string& name, Matrix value, bool trainable) {
  if (index_.count(name)) throw ValidationError("duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(value.rows(), value.cols());
  p->value = std::move(value);
  p->trainable = trainable;
  Parameter& ref = *p;
  index_[name] = p.get();
  params_.push_back(std::move(p));
  return ref;
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  if (Parameter* p = find(name)) return *p;
  throw ValidationError("no parameter named " + name);
}

const Parameter& ParameterStore::at(const std::string& name) const {
  if (const Parameter* p = find(name)) return *p;
  throw ValidationError("no parameter named " + name);
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

size_t ParameterStore::trainable_size() const {
  size_t n = 0;
  for (const auto& p : params_)
    if (p->trainable) n += static_cast<size_t>(p->value.size());
  return n;
}

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, int)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buffer(Var v) {
  Node& n = node(v.id);
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var scalar) {
  if (!record_) throw Error("backward on a tape that does not record gradients");
  const Matrix& v = value(scalar);
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("backward needs a 1x1 node");
  if (!node(scalar.id).needs_grad) return;
  grad_buffer(scalar).setConstant(1.0);
  for (int i = scalar.id; i >= 0; --i) {
    Node& n = node(i);
    if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  Parameter* ptr = &p;
  Var v = push(p.value, p.trainable, [ptr](Tape& t, int self) { ptr->grad += t.node(self).grad; });
  param_nodes_[&p] = v.id;
  return v;
}

Var Tape::lookup(Parameter& table, std::span<const int> ids) {
  Matrix out(static_cast<long>(ids.size()), table.value.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.rows())
      throw ShapeError("lookup id " + std::to_string(ids[i]) + " outside table " + table.name);
    out.row(static_cast<long>(i)) = table.value.row(ids[i]);
  }
  Parameter* ptr = &table;
  std::vector<int> idv(ids.begin(), ids.end());
  return push(std::move(out), table.trainable, [ptr, idv](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    for (size_t i = 0; i < idv.size(); ++i) ptr->grad.row(idv[i]) += g.row(static_cast<long>(i));
  });
}

Var Tape::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add",
          value(a), value(b));
  return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    if (t.needs(a)) t.grad_buffer(a) += g;
    if (t.needs(b)) t.grad_buffer(b) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub",
          value(a), value(b));
  return push(value(a) - value(b), needs(a) || needs(b), [a, b](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    if (t.needs(a)) t.grad_buffer(a) += g;
    if (t.needs(b)) t.grad_buffer(b) -= g;
  });
}

Var Tape::mul(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "mul",
          value(a), value(b));
  return push(value(a).cwiseProduct(value(b)), needs(a) || needs(b), [a, b](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    if (t.needs(a)) t.grad_buffer(a) += g.cwiseProduct(t.value(b));
    if (t.needs(b)) t.grad_buffer(b) += g.cwiseProduct(t.value(a));
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, needs(a), [a, s](Tape& t, int self) {
    t.grad_buffer(a) += t.node(self).grad * s;
  });
}

Var Tape::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), "matmul", value(a), value(b));
  return push(value(a) * value(b), needs(a) || needs(b), [a, b](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    if (t.needs(a)) t.grad_buffer(a).noalias() += g * t.value(b).transpose();
    if (t.needs(b)) t.grad_buffer(b).noalias() += t.value(a).transpose() * g;
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  require(value(a).cols() == value(b).cols(), "matmul_nt", value(a), value(b));
  return push(value(a) * value(b).transpose(), needs(a) || needs(b), [a, b](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    if (t.needs(a)) t.grad_buffer(a).noalias() += g * t.value(b);
    if (t.needs(b)) t.grad_buffer(b).noalias() += g.transpose() * t.value(a);
  });
}

Var Tape::add_row(Var a, Var r) {
  require(value(r).rows() == 1 && value(r).cols() == value(a).cols(), "add_row", value(a),
          value(r));
  Matrix out = value(a).rowwise() + value(r).row(0);
  return push(std::move(out), needs(a) || needs(r), [a, r](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    if (t.needs(a)) t.grad_buffer(a) += g;
    if (t.needs(r)) t.grad_buffer(r) += g.colwise().sum();
  });
}

Var Tape::relu(Var a) {
  return push(value(a).cwiseMax(0.0), needs(a), [a](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    t.grad_buffer(a) += (t.value(a).array() > 0.0).cast<double>().matrix().cwiseProduct(g);
  });
}

Var Tape::sigmoid(Var a) {
  return push(sigmoid_of(value(a)), needs(a), [a](Tape& t, int self) {
    const Matrix& y = t.node(self).value;
    t.grad_buffer(a) += t.node(self).grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
  });
}

Var Tape::tanh(Var a) {
  return push(value(a).array().tanh().matrix(), needs(a), [a](Tape& t, int self) {
    const Matrix& y = t.node(self).value;
    t.grad_buffer(a) += t.node(self).grad.cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

namespace {
Matrix softmax_rows_of(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (long r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

// Backward of a row softmax: dx = y * (dy - <dy, y>) per row.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  Matrix dx = dy;
  for (long r = 0; r < y.rows(); ++r) {
    const double dot = y.row(r).dot(dy.row(r));
    dx.row(r) = y.row(r).cwiseProduct((dy.row(r).array() - dot).matrix());
  }
  return dx;
}
}  // namespace

Var Tape::softmax_rows(Var a) {
  if (value(a).cols() == 0) throw ShapeError("softmax over an empty row");
  return push(softmax_rows_of(value(a)), needs(a), [a](Tape& t, int self) {
    t.grad_buffer(a) += softmax_rows_backward(t.node(self).value, t.node(self).grad);
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const long rows = value(parts[0]).rows();
  long cols = 0;
  bool any = false;
  for (Var p : parts) {
    require(value(p).rows() == rows, "concat_cols", value(parts[0]), value(p));
    cols += value(p).cols();
    any = any || needs(p);
  }
  Matrix out(rows, cols);
  long c = 0;
  for (Var p : parts) {
    out.middleCols(c, value(p).cols()) = value(p);
    c += value(p).cols();
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return push(std::move(out), any, [pv](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    long c = 0;
    for (Var p : pv) {
      const long w = t.value(p).cols();
      if (t.needs(p)) t.grad_buffer(p) += g.middleCols(c, w);
      c += w;
    }
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const long cols = value(parts[0]).cols();
  long rows = 0;
  bool any = false;
  for (Var p : parts) {
    require(value(p).cols() == cols, "concat_rows", value(parts[0]), value(p));
    rows += value(p).rows();
    any = any || needs(p);
  }
  Matrix out(rows, cols);
  long r = 0;
  for (Var p : parts) {
    out.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return push(std::move(out), any, [pv](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    long r = 0;
    for (Var p : pv) {
      const long h = t.value(p).rows();
      if (t.needs(p)) t.grad_buffer(p) += g.middleRows(r, h);
      r += h;
    }
  });
}

Var Tape::row(Var a, long i) {
  if (i < 0 || i >= value(a).rows()) throw ShapeError("row index out of range");
  return push(value(a).row(i), needs(a), [a, i](Tape& t, int self) {
    t.grad_buffer(a).row(i) += t.node(self).grad.row(0);
  });
}

Var Tape::gather_mean_rows(Var a, const std::vector<std::vector<int>>& groups) {
  const Matrix& av = value(a);
  Matrix out = Matrix::Zero(static_cast<long>(groups.size()), av.cols());
  for (size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw ShapeError("gather_mean_rows: empty group");
    for (int r : groups[g]) {
      if (r < 0 || r >= av.rows()) throw ShapeError("gather_mean_rows: row out of range");
      out.row(static_cast<long>(g)) += av.row(r);
    }
    out.row(static_cast<long>(g)) /= static_cast<double>(groups[g].size());
  }
  return push(std::move(out), needs(a), [a, groups](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.grad_buffer(a);
    for (size_t k = 0; k < groups.size(); ++k) {
      const double w = 1.0 / static_cast<double>(groups[k].size());
      for (int r : groups[k]) ga.row(r) += w * g.row(static_cast<long>(k));
    }
  });
}

Var Tape::sum(std::span<const Var> scalars) {
  Matrix out = Matrix::Zero(1, 1);
  bool any = false;
  for (Var s : scalars) {
    if (value(s).size() != 1) throw ShapeError("sum expects 1x1 nodes");
    out(0, 0) += value(s)(0, 0);
    any = any || needs(s);
  }
  std::vector<Var> sv(scalars.begin(), scalars.end());
  return push(std::move(out), any, [sv](Tape& t, int self) {
    const double g = t.node(self).grad(0, 0);
    for (Var s : sv)
      if (t.needs(s)) t.grad_buffer(s)(0, 0) += g;
  });
}

Var Tape::attention(Var keys, Var queries, Var beta) {
  const Matrix& k = value(keys);
  const Matrix& q = value(queries);
  const Matrix& b = value(beta);
  const long n = k.cols();
  require(q.cols() == n, "attention(keys, queries)", k, q);
  if (b.size() != 3 * n)
    throw ShapeError("attention: beta has " + std::to_string(b.size()) + " entries, expected " +
                     std::to_string(3 * n));
  if (k.rows() == 0) throw ShapeError("attention over zero keys");
  const RowVector b1 = Eigen::Map<const RowVector>(b.data(), b.size()).head(n);
  const RowVector b2 = Eigen::Map<const RowVector>(b.data(), b.size()).segment(n, n);
  const RowVector b3 = Eigen::Map<const RowVector>(b.data(), b.size()).tail(n);
  // scores(r, i) = K_i.b1 + Q_r.b2 + sum_c K_ic Q_rc b3_c
  Matrix scores = q * b3.asDiagonal() * k.transpose();
  scores.rowwise() += (k * b1.transpose()).transpose().row(0);
  scores.colwise() += q * b2.transpose();
  Matrix probs = softmax_rows_of(scores);
  return push(std::move(probs), needs(keys) || needs(queries) || needs(beta),
              [keys, queries, beta, n](Tape& t, int self) {
                const Matrix& k = t.value(keys);
                const Matrix& q = t.value(queries);
                const Matrix& b = t.value(beta);
                const RowVector b1 = Eigen::Map<const RowVector>(b.data(), b.size()).head(n);
                const RowVector b2 = Eigen::Map<const RowVector>(b.data(), b.size()).segment(n, n);
                const RowVector b3 = Eigen::Map<const RowVector>(b.data(), b.size()).tail(n);
                const Matrix ds = softmax_rows_backward(t.node(self).value, t.node(self).grad);
                const RowVector col_sums = ds.colwise().sum();   // per key
                const Eigen::VectorXd row_sums = ds.rowwise().sum();  // per query
                if (t.needs(keys)) {
                  Matrix& gk = t.grad_buffer(keys);
                  gk.noalias() += col_sums.transpose() * b1;
                  gk.noalias() += ds.transpose() * q * b3.asDiagonal();
                }
                if (t.needs(queries)) {
                  Matrix& gq = t.grad_buffer(queries);
                  gq.noalias() += row_sums * b2;
                  gq.noalias() += ds * k * b3.asDiagonal();
                }
                if (t.needs(beta)) {
                  RowVector db(3 * n);
                  db.head(n) = col_sums * k;
                  db.segment(n, n) = row_sums.transpose() * q;
                  db.tail(n) = (q.cwiseProduct(ds * k)).colwise().sum();
                  Matrix& gb = t.grad_buffer(beta);
                  gb += Eigen::Map<const Matrix>(db.data(), b.rows(), b.cols());
                }
              });
}

Var Tape::cross_entropy(Var logits, long target) {
  const Matrix& z = value(logits);
  if (z.rows() != 1) throw ShapeError("cross_entropy expects a 1 x m row");
  if (target < 0 || target >= z.cols())
    throw LabelError("label " + std::to_string(target) + " outside [0, " +
                     std::to_string(z.cols()) + ")");
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  Matrix out(1, 1);
  out(0, 0) = lse - z(0, target);
  return push(std::move(out), needs(logits), [logits, target, lse](Tape& t, int self) {
    const double g = t.node(self).grad(0, 0);
    Matrix p = (t.value(logits).array() - lse).exp().matrix();
    p(0, target) -= 1.0;
    t.grad_buffer(logits) += g * p;
  });
}

namespace {
struct GruCache {
  Matrix z, r, n, hu_n, h;
  std::vector<long> order;
};
}  // namespace

Var Tape::gru(Var inputs, Var w_in, Var w_hidden, Var bias, bool reverse) {
  const Matrix& x = value(inputs);
  const Matrix& w = value(w_in);
  const Matrix& u = value(w_hidden);
  const long h = u.rows();
  require(w.rows() == x.cols() && w.cols() == 3 * h, "gru(inputs, w_in)", x, w);
  require(u.cols() == 3 * h, "gru(w_hidden)", u, u);
  require(value(bias).rows() == 1 && value(bias).cols() == 3 * h, "gru(bias)", value(bias), u);
  const long len = x.rows();

  auto cache = std::make_shared<GruCache>();
  cache->z.resize(len, h);
  cache->r.resize(len, h);
  cache->n.resize(len, h);
  cache->hu_n.resize(len, h);
  cache->h.resize(len, h);
  for (long s = 0; s < len; ++s) cache->order.push_back(reverse ? len - 1 - s : s);

  Matrix a = x * w;
  a.rowwise() += value(bias).row(0);
  RowVector hprev = RowVector::Zero(h);
  for (long s = 0; s < len; ++s) {
    const long i = cache->order[static_cast<size_t>(s)];
    const RowVector hu = hprev * u;
    const RowVector z = sigmoid_of(a.row(i).head(h) + hu.head(h));
    const RowVector r = sigmoid_of(a.row(i).segment(h, h) + hu.segment(h, h));
    const RowVector hun = hu.tail(h);
    const RowVector n = (a.row(i).tail(h) + r.cwiseProduct(hun)).array().tanh().matrix();
    const RowVector hn = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(hprev);
    cache->z.row(i) = z;
    cache->r.row(i) = r;
    cache->n.row(i) = n;
    cache->hu_n.row(i) = hun;
    cache->h.row(i) = hn;
    hprev = hn;
  }
  Matrix out = cache->h;
  const bool need = needs(inputs) || needs(w_in) || needs(w_hidden) || needs(bias);
  return push(std::move(out), need,
              [inputs, w_in, w_hidden, bias, cache, h, len](Tape& t, int self) {
                const Matrix& dh_out = t.node(self).grad;
                const Matrix& x = t.value(inputs);
                const Matrix& w = t.value(w_in);
                const Matrix& u = t.value(w_hidden);
                Matrix da(len, 3 * h);
                Matrix du = Matrix::Zero(h, 3 * h);
                RowVector carry = RowVector::Zero(h);
                for (long s = len - 1; s >= 0; --s) {
                  const long i = cache->order[static_cast<size_t>(s)];
                  const RowVector hprev = s == 0 ? RowVector::Zero(h).eval()
                                                 : RowVector(cache->h.row(cache->order[s - 1]));
                  const RowVector dh = dh_out.row(i) + carry;
                  const auto z = cache->z.row(i).array();
                  const auto r = cache->r.row(i).array();
                  const auto n = cache->n.row(i).array();
                  const auto hun = cache->hu_n.row(i).array();
                  const RowVector dz = (dh.array() * (hprev.array() - n)).matrix();
                  const RowVector dn_pre = (dh.array() * (1.0 - z) * (1.0 - n.square())).matrix();
                  const RowVector dr_pre = (dn_pre.array() * hun * r * (1.0 - r)).matrix();
                  const RowVector dz_pre = (dz.array() * z * (1.0 - z)).matrix();
                  da.row(i).head(h) = dz_pre;
                  da.row(i).segment(h, h) = dr_pre;
                  da.row(i).tail(h) = dn_pre;
                  RowVector dhu(3 * h);
                  dhu.head(h) = dz_pre;
                  dhu.segment(h, h) = dr_pre;
                  dhu.tail(h) = (dn_pre.array() * r).matrix();
                  du.noalias() += hprev.transpose() * dhu;
                  carry = (dh.array() * z).matrix() + dhu * u.transpose();
                }
                if (t.needs(w_hidden)) t.grad_buffer(w_hidden) += du;
                if (t.needs(w_in)) t.grad_buffer(w_in).noalias() += x.transpose() * da;
                if (t.needs(bias)) t.grad_buffer(bias) += da.colwise().sum();
                if (t.needs(inputs)) t.grad_buffer(inputs).noalias() += da * w.transpose();
              });
}

namespace {
struct CnnCache {
  std::vector<Matrix> windows;            // per token: positions x (k * e)
  std::vector<std::vector<long>> argmax;  // per token: filter -> position
};
}  // namespace

Var Tape::char_cnn(const std::vector<std::vector<int>>& char_ids, Parameter& char_table,
                   Var filters, Var bias, int kernel_width) {
  const Matrix& table = char_table.value;
  const Matrix& wf = value(filters);
  const long e = table.cols();
  const long k = kernel_width;
  if (wf.rows() != k * e)
    throw ShapeError("char_cnn: filter bank has " + std::to_string(wf.rows()) +
                     " rows, expected " + std::to_string(k * e));
  require(value(bias).rows() == 1 && value(bias).cols() == wf.cols(), "char_cnn(bias)",
          value(bias), wf);
  const long filters_n = wf.cols();
  auto cache = std::make_shared<CnnCache>();
  Matrix out(static_cast<long>(char_ids.size()), filters_n);
  for (size_t t = 0; t < char_ids.size(); ++t) {
    const auto& ids = char_ids[t];
    const long len = static_cast<long>(ids.size());
    const long positions = std::max(len, k) - k + 1;
    Matrix win = Matrix::Zero(positions, k * e);
    for (long p = 0; p < positions; ++p)
      for (long j = 0; j < k; ++j)
        if (p + j < len) {
          const int c = ids[static_cast<size_t>(p + j)];
          if (c < 0 || c >= table.rows()) throw ShapeError("char id outside table");
          win.block(p, j * e, 1, e) = table.row(c);
        }
    Matrix conv = win * wf;
    conv.rowwise() += value(bias).row(0);
    std::vector<long> best(static_cast<size_t>(filters_n), 0);
    for (long f = 0; f < filters_n; ++f) {
      long arg = 0;
      out(static_cast<long>(t), f) = conv.col(f).maxCoeff(&arg);
      best[static_cast<size_t>(f)] = arg;
    }
    cache->windows.push_back(std::move(win));
    cache->argmax.push_back(std::move(best));
  }
  Parameter* tbl = &char_table;
  const bool need = char_table.trainable || needs(filters) || needs(bias);
  return push(std::move(out), need,
              [cache, tbl, char_ids, filters, bias, k, e, filters_n](Tape& t, int self) {
                const Matrix& g = t.node(self).grad;
                const Matrix& wf = t.value(filters);
                for (size_t tok = 0; tok < char_ids.size(); ++tok) {
                  const Matrix& win = cache->windows[tok];
                  Matrix dconv = Matrix::Zero(win.rows(), filters_n);
                  for (long f = 0; f < filters_n; ++f)
                    dconv(cache->argmax[tok][static_cast<size_t>(f)], f) =
                        g(static_cast<long>(tok), f);
                  if (t.needs(filters)) t.grad_buffer(filters).noalias() += win.transpose() * dconv;
                  if (t.needs(bias)) t.grad_buffer(bias) += g.row(static_cast<long>(tok));
                  if (tbl->trainable) {
                    const Matrix dwin = dconv * wf.transpose();
                    const auto& ids = char_ids[tok];
                    const long len = static_cast<long>(ids.size());
                    for (long p = 0; p < win.rows(); ++p)
                      for (long j = 0; j < k; ++j)
                        if (p + j < len)
                          tbl->grad.row(ids[static_cast<size_t>(p + j)]) +=
                              dwin.block(p, j * e, 1, e);
                  }
                }
              });
}

}  // namespace dstqa
