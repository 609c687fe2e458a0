#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfnoma::ad {

using Mat = Eigen::MatrixXd;

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Tape;

// Lightweight handle into a tape; 1x1 nodes act as scalars.
struct Value {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& mat() const;
  double scalar() const;
  int rows() const;
  int cols() const;
};

enum class OpKind : std::uint8_t {
  kLeaf, kConst,
  kAdd, kSub, kNeg, kMul, kDiv,      // elementwise
  kMatMul, kScale, kAddConst, kScalarMul,
  kEntry, kSegment, kReshape, kVStack,
  kSigmoid, kTanh, kExp, kLog, kLog2, kRelu, kSqrt,
  kSum, kMean, kMinReduce, kMaxReduce,
};

const char* op_name(OpKind op);

// Append-only reverse-mode tape over real dense matrices. Nodes are stored in
// topological order by construction; backward() visits each node once.
class Tape {
 public:
  Value leaf(const Mat& v);
  Value constant(const Mat& v);
  Value constant(double v);

  // one backward pass from a scalar loss; adjoints are reset first
  void backward(Value loss);

  const Mat& value(Value v) const { return nodes_[v.id].value; }
  Mat grad(Value v) const;
  bool visited_in_backward(Value v) const { return nodes_[v.id].visited; }

  std::size_t size() const { return nodes_.size(); }

 private:
  friend struct TapeOps;

  struct Node {
    OpKind op;
    int a = -1;
    int b = -1;
    int i0 = 0;     // aux: entry row / segment start / reshape rows / pool offset
    int i1 = 0;     // aux: entry col / segment len / reshape cols / pool count
    int sel = 0;    // argmin/argmax linear index
    double c0 = 0.0;
    Mat value;
    Mat adjoint;
    bool requires_grad = false;
    bool visited = false;
  };

  int push(Node&& n);
  void check_finite(const Node& n) const;
  void accumulate(int id, const Mat& g);

  std::vector<Node> nodes_;
  std::vector<int> pool_;  // n-ary input ids (vstack)
};

// elementwise / structural ops
Value binary_op(OpKind op, Value a, Value b);
Value unary_op(OpKind op, Value a);
Value matmul(Value a, Value b);
Value scale(Value a, double c);
Value add_const(Value a, double c);
Value scalar_mul(Value m, Value s);  // broadcast multiply by a 1x1 node
Value entry(Value a, int r, int c);
Value segment(Value a, int start, int len);   // rows of a column vector
Value reshape(Value a, int rows, int cols);   // column-major
Value vstack(const std::vector<Value>& parts);
Value sum(Value a);
Value mean(Value a);
Value min_reduce(Value a);  // subgradient to the argmin entry, ties -> lowest index
Value max_reduce(Value a);

inline Value add(Value a, Value b) { return binary_op(OpKind::kAdd, a, b); }
inline Value sub(Value a, Value b) { return binary_op(OpKind::kSub, a, b); }
inline Value mul(Value a, Value b) { return binary_op(OpKind::kMul, a, b); }
inline Value div(Value a, Value b) { return binary_op(OpKind::kDiv, a, b); }
inline Value neg(Value a) { return unary_op(OpKind::kNeg, a); }
inline Value sigmoid(Value a) { return unary_op(OpKind::kSigmoid, a); }
inline Value tanh_(Value a) { return unary_op(OpKind::kTanh, a); }
inline Value exp_(Value a) { return unary_op(OpKind::kExp, a); }
inline Value log_(Value a) { return unary_op(OpKind::kLog, a); }
inline Value log2_(Value a) { return unary_op(OpKind::kLog2, a); }
inline Value relu(Value a) { return unary_op(OpKind::kRelu, a); }
inline Value sqrt_(Value a) { return unary_op(OpKind::kSqrt, a); }

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }
inline Value operator/(Value a, Value b) { return div(a, b); }
inline Value operator-(Value a) { return neg(a); }
inline Value operator*(double c, Value a) { return scale(a, c); }
inline Value operator*(Value a, double c) { return scale(a, c); }
inline Value operator+(Value a, double c) { return add_const(a, c); }
inline Value operator+(double c, Value a) { return add_const(a, c); }
inline Value operator-(Value a, double c) { return add_const(a, -c); }
inline Value operator-(double c, Value a) { return add_const(neg(a), c); }

// |re + j im|^2 elementwise from the real-pair representation
inline Value cabs2(Value re, Value im) { return add(mul(re, re), mul(im, im)); }

// softmax over all entries; the constant max-shift leaves value and gradient
// unchanged
Value softmax(Value a);

// Named collection of tensor shapes behind one flat parameter vector.
// flatten/unflatten is the identity round trip; bind() creates tape leaves.
class ParamVector {
 public:
  int add(const std::string& name, int rows, int cols);
  int dim() const { return total_; }
  int count() const { return static_cast<int>(shapes_.size()); }
  const std::string& name(int slot) const { return shapes_[slot].name; }
  int slot(const std::string& name) const;

  Eigen::VectorXd flatten(const std::vector<Mat>& tensors) const;
  std::vector<Mat> unflatten(const Eigen::VectorXd& flat) const;
  std::vector<Value> bind(Tape& tape, const Eigen::VectorXd& flat) const;
  Eigen::VectorXd collect_grad(const Tape& tape,
                               const std::vector<Value>& leaves) const;

 private:
  struct Shape {
    std::string name;
    int rows;
    int cols;
    int offset;
  };
  std::vector<Shape> shapes_;
  int total_ = 0;
};

// gradient of a scalar loss w.r.t. bound parameter leaves; leaves the loss
// does not reach get zeros (reported through Tape::visited_in_backward)
Eigen::VectorXd gradient(Tape& tape, Value loss, const ParamVector& params,
                         const std::vector<Value>& leaves);

using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

double fd_default_eps(const Eigen::VectorXd& theta);

// central-difference Hessian-vector product: (g(x+eps v) - g(x-eps v)) / 2eps
Eigen::VectorXd fd_hvp(const GradFn& grad_theta, const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& v, double eps);

// mixed second-order product: d/dtheta of grad_alpha, applied to v
Eigen::VectorXd fd_mixed_vjp(const GradFn& grad_alpha_of_theta,
                             const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& v, double eps);

}  // namespace cfnoma::ad
