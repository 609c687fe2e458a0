#include "cfnoma/autodiff.hpp"

#include <cmath>

namespace cfnoma::ad {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConst: return "const";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kNeg: return "neg";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddConst: return "add_const";
    case OpKind::kScalarMul: return "scalar_mul";
    case OpKind::kEntry: return "entry";
    case OpKind::kSegment: return "segment";
    case OpKind::kReshape: return "reshape";
    case OpKind::kVStack: return "vstack";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kLog2: return "log2";
    case OpKind::kRelu: return "relu";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kMinReduce: return "min_reduce";
    case OpKind::kMaxReduce: return "max_reduce";
  }
  return "?";
}

const Mat& Value::mat() const { return tape->value(*this); }
double Value::scalar() const {
  const Mat& m = mat();
  if (m.size() != 1) throw NumericError("scalar() on non-1x1 value");
  return m(0, 0);
}
int Value::rows() const { return static_cast<int>(mat().rows()); }
int Value::cols() const { return static_cast<int>(mat().cols()); }

void Tape::check_finite(const Node& n) const {
  if (!n.value.allFinite())
    throw NumericError(std::string("non-finite value produced by op '") +
                       op_name(n.op) + "'");
}

int Tape::push(Node&& n) {
  check_finite(n);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Value Tape::leaf(const Mat& v) {
  Node n;
  n.op = OpKind::kLeaf;
  n.value = v;
  n.requires_grad = true;
  return {this, push(std::move(n))};
}

Value Tape::constant(const Mat& v) {
  Node n;
  n.op = OpKind::kConst;
  n.value = v;
  return {this, push(std::move(n))};
}

Value Tape::constant(double v) {
  return constant(Mat::Constant(1, 1, v));
}

Mat Tape::grad(Value v) const {
  const Node& n = nodes_[v.id];
  if (n.adjoint.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

void Tape::accumulate(int id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.adjoint.size() == 0)
    n.adjoint = Mat::Zero(n.value.rows(), n.value.cols());
  n.adjoint += g;
  n.visited = true;
}

// internal access for the free-function op builders
struct TapeOps {
  using Node = Tape::Node;
  static int push(Tape& t, Node&& n) { return t.push(std::move(n)); }
  static bool rg(const Tape& t, int id) { return t.nodes_[id].requires_grad; }
  static std::vector<int>& pool(Tape& t) { return t.pool_; }
  static void check_same_tape(Value a, Value b) {
    if (a.tape != b.tape) throw NumericError("values from different tapes");
  }
};

Value binary_op(OpKind op, Value a, Value b) {
  TapeOps::check_same_tape(a, b);
  Tape& t = *a.tape;
  const Mat& va = t.value(a);
  const Mat& vb = t.value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw NumericError(std::string("shape mismatch in ") + op_name(op));
  TapeOps::Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = TapeOps::rg(t, a.id) || TapeOps::rg(t, b.id);
  switch (op) {
    case OpKind::kAdd: n.value = va + vb; break;
    case OpKind::kSub: n.value = va - vb; break;
    case OpKind::kMul: n.value = va.cwiseProduct(vb); break;
    case OpKind::kDiv: n.value = va.cwiseQuotient(vb); break;
    default: throw NumericError("binary_op: bad op");
  }
  return {&t, TapeOps::push(t, std::move(n))};
}

Value unary_op(OpKind op, Value a) {
  Tape& t = *a.tape;
  const Mat& va = t.value(a);
  TapeOps::Node n;
  n.op = op;
  n.a = a.id;
  n.requires_grad = TapeOps::rg(t, a.id);
  switch (op) {
    case OpKind::kNeg: n.value = -va; break;
    case OpKind::kSigmoid:
      n.value = (1.0 + (-va.array()).exp()).inverse().matrix();
      break;
    case OpKind::kTanh: n.value = va.array().tanh().matrix(); break;
    case OpKind::kExp: n.value = va.array().exp().matrix(); break;
    case OpKind::kLog: n.value = va.array().log().matrix(); break;
    case OpKind::kLog2: n.value = (va.array().log() / M_LN2).matrix(); break;
    case OpKind::kRelu: n.value = va.array().max(0.0).matrix(); break;
    case OpKind::kSqrt: n.value = va.array().sqrt().matrix(); break;
    default: throw NumericError("unary_op: bad op");
  }
  return {&t, TapeOps::push(t, std::move(n))};
}

Value matmul(Value a, Value b) {
  TapeOps::check_same_tape(a, b);
  Tape& t = *a.tape;
  const Mat& va = t.value(a);
  const Mat& vb = t.value(b);
  if (va.cols() != vb.rows()) throw NumericError("shape mismatch in matmul");
  TapeOps::Node n;
  n.op = OpKind::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = TapeOps::rg(t, a.id) || TapeOps::rg(t, b.id);
  n.value = va * vb;
  return {&t, TapeOps::push(t, std::move(n))};
}

Value scale(Value a, double c) {
  Tape& t = *a.tape;
  TapeOps::Node n;
  n.op = OpKind::kScale;
  n.a = a.id;
  n.c0 = c;
  n.requires_grad = TapeOps::rg(t, a.id);
  n.value = c * t.value(a);
  return {&t, TapeOps::push(t, std::move(n))};
}

Value add_const(Value a, double c) {
  Tape& t = *a.tape;
  TapeOps::Node n;
  n.op = OpKind::kAddConst;
  n.a = a.id;
  n.c0 = c;
  n.requires_grad = TapeOps::rg(t, a.id);
  n.value = (t.value(a).array() + c).matrix();
  return {&t, TapeOps::push(t, std::move(n))};
}

Value scalar_mul(Value m, Value s) {
  TapeOps::check_same_tape(m, s);
  Tape& t = *m.tape;
  if (t.value(s).size() != 1) throw NumericError("scalar_mul: s must be 1x1");
  TapeOps::Node n;
  n.op = OpKind::kScalarMul;
  n.a = m.id;
  n.b = s.id;
  n.requires_grad = TapeOps::rg(t, m.id) || TapeOps::rg(t, s.id);
  n.value = t.value(s)(0, 0) * t.value(m);
  return {&t, TapeOps::push(t, std::move(n))};
}

Value entry(Value a, int r, int c) {
  Tape& t = *a.tape;
  const Mat& va = t.value(a);
  if (r < 0 || r >= va.rows() || c < 0 || c >= va.cols())
    throw NumericError("entry: index out of range");
  TapeOps::Node n;
  n.op = OpKind::kEntry;
  n.a = a.id;
  n.i0 = r;
  n.i1 = c;
  n.requires_grad = TapeOps::rg(t, a.id);
  n.value = Mat::Constant(1, 1, va(r, c));
  return {&t, TapeOps::push(t, std::move(n))};
}

Value segment(Value a, int start, int len) {
  Tape& t = *a.tape;
  const Mat& va = t.value(a);
  if (va.cols() != 1 || start < 0 || start + len > va.rows())
    throw NumericError("segment: bad range or non-column input");
  TapeOps::Node n;
  n.op = OpKind::kSegment;
  n.a = a.id;
  n.i0 = start;
  n.i1 = len;
  n.requires_grad = TapeOps::rg(t, a.id);
  n.value = va.block(start, 0, len, 1);
  return {&t, TapeOps::push(t, std::move(n))};
}

Value reshape(Value a, int rows, int cols) {
  Tape& t = *a.tape;
  const Mat& va = t.value(a);
  if (va.size() != rows * cols) throw NumericError("reshape: size mismatch");
  TapeOps::Node n;
  n.op = OpKind::kReshape;
  n.a = a.id;
  n.i0 = rows;
  n.i1 = cols;
  n.requires_grad = TapeOps::rg(t, a.id);
  n.value = Eigen::Map<const Mat>(va.data(), rows, cols);
  return {&t, TapeOps::push(t, std::move(n))};
}

Value vstack(const std::vector<Value>& parts) {
  if (parts.empty()) throw NumericError("vstack: empty");
  Tape& t = *parts[0].tape;
  int total = 0;
  bool rg = false;
  for (const Value& p : parts) {
    TapeOps::check_same_tape(parts[0], p);
    if (p.cols() != 1) throw NumericError("vstack: column vectors only");
    total += p.rows();
    rg = rg || TapeOps::rg(t, p.id);
  }
  TapeOps::Node n;
  n.op = OpKind::kVStack;
  n.i0 = static_cast<int>(TapeOps::pool(t).size());
  n.i1 = static_cast<int>(parts.size());
  n.requires_grad = rg;
  n.value.resize(total, 1);
  int row = 0;
  for (const Value& p : parts) {
    TapeOps::pool(t).push_back(p.id);
    n.value.block(row, 0, p.rows(), 1) = t.value(p);
    row += p.rows();
  }
  return {&t, TapeOps::push(t, std::move(n))};
}

namespace {

Value reduce_op(OpKind op, Value a) {
  Tape& t = *a.tape;
  const Mat& va = t.value(a);
  TapeOps::Node n;
  n.op = op;
  n.a = a.id;
  n.requires_grad = TapeOps::rg(t, a.id);
  switch (op) {
    case OpKind::kSum: n.value = Mat::Constant(1, 1, va.sum()); break;
    case OpKind::kMean: n.value = Mat::Constant(1, 1, va.mean()); break;
    case OpKind::kMinReduce: {
      int best = 0;
      for (int i = 1; i < va.size(); ++i)
        if (va(i) < va(best)) best = i;
      n.sel = best;
      n.value = Mat::Constant(1, 1, va(best));
      break;
    }
    case OpKind::kMaxReduce: {
      int best = 0;
      for (int i = 1; i < va.size(); ++i)
        if (va(i) > va(best)) best = i;
      n.sel = best;
      n.value = Mat::Constant(1, 1, va(best));
      break;
    }
    default: throw NumericError("reduce_op: bad op");
  }
  return {&t, TapeOps::push(t, std::move(n))};
}

}  // namespace

Value sum(Value a) { return reduce_op(OpKind::kSum, a); }
Value mean(Value a) { return reduce_op(OpKind::kMean, a); }
Value min_reduce(Value a) { return reduce_op(OpKind::kMinReduce, a); }
Value max_reduce(Value a) { return reduce_op(OpKind::kMaxReduce, a); }

Value softmax(Value a) {
  const double shift = a.mat().maxCoeff();
  Value e = exp_(add_const(a, -shift));
  Value total = sum(e);
  // elementwise divide by the broadcast total
  Value inv = div(a.tape->constant(1.0), total);
  return scalar_mul(e, inv);
}

void Tape::backward(Value loss) {
  if (loss.tape != this) throw NumericError("backward: foreign value");
  Node& ln = nodes_[loss.id];
  if (ln.value.size() != 1) throw NumericError("backward: loss must be 1x1");
  for (Node& n : nodes_) {
    n.adjoint.resize(0, 0);
    n.visited = false;
  }
  if (!ln.requires_grad) return;
  ln.adjoint = Mat::Constant(1, 1, 1.0);
  ln.visited = true;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.visited || n.adjoint.size() == 0) continue;
    const Mat& g = n.adjoint;
    switch (n.op) {
      case OpKind::kLeaf:
      case OpKind::kConst:
        break;
      case OpKind::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case OpKind::kSub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case OpKind::kNeg:
        accumulate(n.a, -g);
        break;
      case OpKind::kMul:
        accumulate(n.a, g.cwiseProduct(nodes_[n.b].value));
        accumulate(n.b, g.cwiseProduct(nodes_[n.a].value));
        break;
      case OpKind::kDiv: {
        const Mat& va = nodes_[n.a].value;
        const Mat& vb = nodes_[n.b].value;
        accumulate(n.a, g.cwiseQuotient(vb));
        accumulate(n.b, -(g.cwiseProduct(va).cwiseQuotient(vb.cwiseProduct(vb))));
        break;
      }
      case OpKind::kMatMul:
        accumulate(n.a, g * nodes_[n.b].value.transpose());
        accumulate(n.b, nodes_[n.a].value.transpose() * g);
        break;
      case OpKind::kScale:
        accumulate(n.a, n.c0 * g);
        break;
      case OpKind::kAddConst:
        accumulate(n.a, g);
        break;
      case OpKind::kScalarMul: {
        accumulate(n.a, nodes_[n.b].value(0, 0) * g);
        accumulate(n.b,
                   Mat::Constant(1, 1, g.cwiseProduct(nodes_[n.a].value).sum()));
        break;
      }
      case OpKind::kEntry: {
        Mat ga = Mat::Zero(nodes_[n.a].value.rows(), nodes_[n.a].value.cols());
        ga(n.i0, n.i1) = g(0, 0);
        accumulate(n.a, ga);
        break;
      }
      case OpKind::kSegment: {
        Mat ga = Mat::Zero(nodes_[n.a].value.rows(), 1);
        ga.block(n.i0, 0, n.i1, 1) = g;
        accumulate(n.a, ga);
        break;
      }
      case OpKind::kReshape: {
        accumulate(n.a, Eigen::Map<const Mat>(g.data(), nodes_[n.a].value.rows(),
                                              nodes_[n.a].value.cols()));
        break;
      }
      case OpKind::kVStack: {
        int row = 0;
        for (int p = 0; p < n.i1; ++p) {
          const int cid = pool_[n.i0 + p];
          const int len = static_cast<int>(nodes_[cid].value.rows());
          accumulate(cid, g.block(row, 0, len, 1));
          row += len;
        }
        break;
      }
      case OpKind::kSigmoid: {
        const Mat& y = n.value;
        accumulate(n.a, g.cwiseProduct(
                            (y.array() * (1.0 - y.array())).matrix()));
        break;
      }
      case OpKind::kTanh: {
        const Mat& y = n.value;
        accumulate(n.a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
        break;
      }
      case OpKind::kExp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case OpKind::kLog:
        accumulate(n.a, g.cwiseQuotient(nodes_[n.a].value));
        break;
      case OpKind::kLog2:
        accumulate(n.a, (g.array() / (nodes_[n.a].value.array() * M_LN2)).matrix());
        break;
      case OpKind::kRelu: {
        const Mat mask =
            (nodes_[n.a].value.array() > 0.0).cast<double>().matrix();
        accumulate(n.a, g.cwiseProduct(mask));
        break;
      }
      case OpKind::kSqrt:
        accumulate(n.a, (g.array() * 0.5 / n.value.array()).matrix());
        break;
      case OpKind::kSum:
        accumulate(n.a, Mat::Constant(nodes_[n.a].value.rows(),
                                      nodes_[n.a].value.cols(), g(0, 0)));
        break;
      case OpKind::kMean:
        accumulate(n.a, Mat::Constant(nodes_[n.a].value.rows(),
                                      nodes_[n.a].value.cols(),
                                      g(0, 0) / nodes_[n.a].value.size()));
        break;
      case OpKind::kMinReduce:
      case OpKind::kMaxReduce: {
        Mat ga = Mat::Zero(nodes_[n.a].value.rows(), nodes_[n.a].value.cols());
        ga(n.sel) = g(0, 0);
        accumulate(n.a, ga);
        break;
      }
    }
  }
}

int ParamVector::add(const std::string& name, int rows, int cols) {
  shapes_.push_back({name, rows, cols, total_});
  total_ += rows * cols;
  return static_cast<int>(shapes_.size()) - 1;
}

int ParamVector::slot(const std::string& name) const {
  for (std::size_t i = 0; i < shapes_.size(); ++i)
    if (shapes_[i].name == name) return static_cast<int>(i);
  throw NumericError("unknown parameter: " + name);
}

Eigen::VectorXd ParamVector::flatten(const std::vector<Mat>& tensors) const {
  Eigen::VectorXd flat(total_);
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    const Shape& s = shapes_[i];
    flat.segment(s.offset, s.rows * s.cols) =
        Eigen::Map<const Eigen::VectorXd>(tensors[i].data(), s.rows * s.cols);
  }
  return flat;
}

std::vector<Mat> ParamVector::unflatten(const Eigen::VectorXd& flat) const {
  if (flat.size() != total_) throw NumericError("unflatten: size mismatch");
  std::vector<Mat> out(shapes_.size());
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    const Shape& s = shapes_[i];
    out[i] = Eigen::Map<const Mat>(flat.data() + s.offset, s.rows, s.cols);
  }
  return out;
}

std::vector<Value> ParamVector::bind(Tape& tape,
                                     const Eigen::VectorXd& flat) const {
  if (flat.size() != total_) throw NumericError("bind: size mismatch");
  std::vector<Value> leaves;
  leaves.reserve(shapes_.size());
  for (const Shape& s : shapes_) {
    leaves.push_back(
        tape.leaf(Eigen::Map<const Mat>(flat.data() + s.offset, s.rows, s.cols)));
  }
  return leaves;
}

Eigen::VectorXd ParamVector::collect_grad(
    const Tape& tape, const std::vector<Value>& leaves) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(total_);
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    const Shape& s = shapes_[i];
    const Mat& adj = tape.grad(leaves[i]);
    g.segment(s.offset, s.rows * s.cols) =
        Eigen::Map<const Eigen::VectorXd>(adj.data(), s.rows * s.cols);
  }
  return g;
}

Eigen::VectorXd gradient(Tape& tape, Value loss, const ParamVector& params,
                         const std::vector<Value>& leaves) {
  tape.backward(loss);
  return params.collect_grad(tape, leaves);
}

double fd_default_eps(const Eigen::VectorXd& theta) {
  return 1e-4 * (1.0 + theta.norm());
}

Eigen::VectorXd fd_hvp(const GradFn& grad_theta, const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& v, double eps) {
  if (!(eps > 0.0) || eps < 1e-300)
    throw NumericError("fd_hvp: eps must be positive and not underflow");
  const Eigen::VectorXd gp = grad_theta(theta + eps * v);
  const Eigen::VectorXd gm = grad_theta(theta - eps * v);
  return (gp - gm) / (2.0 * eps);
}

Eigen::VectorXd fd_mixed_vjp(const GradFn& grad_alpha_of_theta,
                             const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& v, double eps) {
  if (!(eps > 0.0) || eps < 1e-300)
    throw NumericError("fd_mixed_vjp: eps must be positive and not underflow");
  const Eigen::VectorXd gp = grad_alpha_of_theta(theta + eps * v);
  const Eigen::VectorXd gm = grad_alpha_of_theta(theta - eps * v);
  return (gp - gm) / (2.0 * eps);
}

}  // namespace cfnoma::ad
