#include "fitvid/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fitvid {

Node* Tape::make(Tensor value, const std::vector<Node*>& parents) {
  Node* n = alloc();
  n->value = std::move(value);
  for (Node* p : parents)
    if (p && p->requires_grad) n->requires_grad = true;
  return n;
}

void Tape::backward(Node* root) {
  if (root->value.size() != 1)
    throw std::invalid_argument("backward: root must be a scalar");
  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->requires_grad && n->has_grad() && n->backprop) n->backprop();
  }
}

namespace {

void check_same_shape(const Node* a, const Node* b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a->value.shape()) + " vs " +
                                shape_str(b->value.shape()));
}

void accum(Node* p, const ArrayX& g) {
  if (!p->requires_grad) return;
  p->ensure_grad();
  p->grad.array() += g;
}

}  // namespace

Node* add(Tape& t, Node* a, Node* b) {
  check_same_shape(a, b, "add");
  Node* n = t.make(Tensor(a->value.shape(), a->value.array() + b->value.array()), {a, b});
  if (n->requires_grad)
    n->backprop = [n, a, b] {
      accum(a, n->grad.array());
      accum(b, n->grad.array());
    };
  return n;
}

Node* sub(Tape& t, Node* a, Node* b) {
  check_same_shape(a, b, "sub");
  Node* n = t.make(Tensor(a->value.shape(), a->value.array() - b->value.array()), {a, b});
  if (n->requires_grad)
    n->backprop = [n, a, b] {
      accum(a, n->grad.array());
      accum(b, (-n->grad.array()).eval());
    };
  return n;
}

Node* mul(Tape& t, Node* a, Node* b) {
  check_same_shape(a, b, "mul");
  Node* n = t.make(Tensor(a->value.shape(), a->value.array() * b->value.array()), {a, b});
  if (n->requires_grad)
    n->backprop = [n, a, b] {
      accum(a, (n->grad.array() * b->value.array()).eval());
      accum(b, (n->grad.array() * a->value.array()).eval());
    };
  return n;
}

Node* scale(Tape& t, Node* a, Scalar c) {
  Node* n = t.make(Tensor(a->value.shape(), a->value.array() * c), {a});
  if (n->requires_grad)
    n->backprop = [n, a, c] { accum(a, (n->grad.array() * c).eval()); };
  return n;
}

Node* add_scalar(Tape& t, Node* a, Scalar c) {
  Node* n = t.make(Tensor(a->value.shape(), a->value.array() + c), {a});
  if (n->requires_grad) n->backprop = [n, a] { accum(a, n->grad.array()); };
  return n;
}

Node* add_rowvec(Tape& t, Node* x, Node* bias) {
  Index cols = bias->value.size();
  if (x->value.size() % cols != 0)
    throw std::invalid_argument("add_rowvec: row width mismatch");
  Index rows = x->value.size() / cols;
  Tensor out(x->value.shape());
  out.as_matrix(rows, cols) =
      x->value.as_matrix(rows, cols).rowwise() +
      bias->value.as_matrix(1, cols).row(0);
  Node* n = t.make(std::move(out), {x, bias});
  if (n->requires_grad)
    n->backprop = [n, x, bias, rows, cols] {
      if (x->requires_grad) accum(x, n->grad.array());
      if (bias->requires_grad) {
        bias->ensure_grad();
        bias->grad.as_matrix(1, cols) += n->grad.as_matrix(rows, cols).colwise().sum();
      }
    };
  return n;
}

Node* matmul(Tape& t, Node* a, Node* b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.dim(1) != b->value.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " +
                                shape_str(a->value.shape()) + " x " +
                                shape_str(b->value.shape()));
  Index m = a->value.dim(0), k = a->value.dim(1), nn = b->value.dim(1);
  Tensor out({m, nn});
  out.as_matrix(m, nn).noalias() = a->value.as_matrix(m, k) * b->value.as_matrix(k, nn);
  Node* n = t.make(std::move(out), {a, b});
  if (n->requires_grad)
    n->backprop = [n, a, b, m, k, nn] {
      auto g = n->grad.as_matrix(m, nn);
      if (a->requires_grad) {
        a->ensure_grad();
        a->grad.as_matrix(m, k).noalias() += g * b->value.as_matrix(k, nn).transpose();
      }
      if (b->requires_grad) {
        b->ensure_grad();
        b->grad.as_matrix(k, nn).noalias() += a->value.as_matrix(m, k).transpose() * g;
      }
    };
  return n;
}

Node* sigmoid(Tape& t, Node* a) {
  Tensor out(a->value.shape(), (1.0 / (1.0 + (-a->value.array()).exp())));
  Node* n = t.make(std::move(out), {a});
  if (n->requires_grad)
    n->backprop = [n, a] {
      const auto& y = n->value.array();
      accum(a, (n->grad.array() * y * (1.0 - y)).eval());
    };
  return n;
}

Node* tanh_op(Tape& t, Node* a) {
  Node* n = t.make(Tensor(a->value.shape(), a->value.array().tanh()), {a});
  if (n->requires_grad)
    n->backprop = [n, a] {
      const auto& y = n->value.array();
      accum(a, (n->grad.array() * (1.0 - y * y)).eval());
    };
  return n;
}

Node* swish(Tape& t, Node* a) {
  ArrayX s = 1.0 / (1.0 + (-a->value.array()).exp());
  Node* n = t.make(Tensor(a->value.shape(), a->value.array() * s), {a});
  if (n->requires_grad)
    n->backprop = [n, a] {
      ArrayX s = 1.0 / (1.0 + (-a->value.array()).exp());
      accum(a, (n->grad.array() * (s + a->value.array() * s * (1.0 - s))).eval());
    };
  return n;
}

Node* relu(Tape& t, Node* a) {
  Node* n = t.make(Tensor(a->value.shape(), a->value.array().max(0.0)), {a});
  if (n->requires_grad)
    n->backprop = [n, a] {
      accum(a, (n->grad.array() * (a->value.array() > 0.0).cast<Scalar>()).eval());
    };
  return n;
}

Node* exp_op(Tape& t, Node* a) {
  Node* n = t.make(Tensor(a->value.shape(), a->value.array().exp()), {a});
  if (n->requires_grad)
    n->backprop = [n, a] { accum(a, (n->grad.array() * n->value.array()).eval()); };
  return n;
}

Node* square(Tape& t, Node* a) {
  Node* n = t.make(Tensor(a->value.shape(), a->value.array().square()), {a});
  if (n->requires_grad)
    n->backprop = [n, a] { accum(a, (n->grad.array() * 2.0 * a->value.array()).eval()); };
  return n;
}

Node* sum_all(Tape& t, Node* a) {
  Node* n = t.make(Tensor::scalar(a->value.array().sum()), {a});
  if (n->requires_grad)
    n->backprop = [n, a] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      a->grad.array() += n->grad[0];
    };
  return n;
}

Node* reshape(Tape& t, Node* a, Shape shape) {
  Node* n = t.make(a->value.reshaped(std::move(shape)), {a});
  if (n->requires_grad) n->backprop = [n, a] { accum(a, n->grad.array()); };
  return n;
}

Node* slice_cols(Tape& t, Node* a, Index start, Index len) {
  Index cols = a->value.shape().back();
  if (start < 0 || start + len > cols) throw std::out_of_range("slice_cols");
  Index rows = a->value.size() / cols;
  Shape out_shape = a->value.shape();
  out_shape.back() = len;
  Tensor out(out_shape);
  out.as_matrix(rows, len) = a->value.as_matrix(rows, cols).middleCols(start, len);
  Node* n = t.make(std::move(out), {a});
  if (n->requires_grad)
    n->backprop = [n, a, start, len, rows, cols] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      a->grad.as_matrix(rows, cols).middleCols(start, len) += n->grad.as_matrix(rows, len);
    };
  return n;
}

Node* concat_cols(Tape& t, const std::vector<Node*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  Index cols = 0;
  Index rows = parts[0]->value.size() / parts[0]->value.shape().back();
  for (Node* p : parts) {
    Index c = p->value.shape().back();
    if (p->value.size() != rows * c)
      throw std::invalid_argument("concat_cols: row count mismatch");
    cols += c;
  }
  Shape out_shape = parts[0]->value.shape();
  out_shape.back() = cols;
  Tensor out(out_shape);
  auto om = out.as_matrix(rows, cols);
  Index at = 0;
  for (Node* p : parts) {
    Index c = p->value.shape().back();
    if (c > 0) om.middleCols(at, c) = p->value.as_matrix(rows, c);
    at += c;
  }
  Node* n = t.make(std::move(out), parts);
  if (n->requires_grad) {
    std::vector<Node*> ps = parts;
    n->backprop = [n, ps, rows, cols] {
      auto gm = n->grad.as_matrix(rows, cols);
      Index at = 0;
      for (Node* p : ps) {
        Index c = p->value.shape().back();
        if (c > 0 && p->requires_grad) {
          p->ensure_grad();
          p->grad.as_matrix(rows, c) += gm.middleCols(at, c);
        }
        at += c;
      }
    };
  }
  return n;
}

// ---- convolution ------------------------------------------------------------

namespace {

struct ConvDims {
  Index N, H, W, C, KH, KW, Cout, OH, OW, stride, pad;
};

ConvDims conv_dims(const Node* x, const Node* w, Index stride, Index pad) {
  if (x->value.rank() != 4) throw std::invalid_argument("conv2d: input must be NHWC");
  if (w->value.rank() != 4) throw std::invalid_argument("conv2d: kernel must be (KH,KW,Cin,Cout)");
  ConvDims d;
  d.N = x->value.dim(0);
  d.H = x->value.dim(1);
  d.W = x->value.dim(2);
  d.C = x->value.dim(3);
  d.KH = w->value.dim(0);
  d.KW = w->value.dim(1);
  d.Cout = w->value.dim(3);
  if (w->value.dim(2) != d.C)
    throw std::invalid_argument("conv2d: channel mismatch, input " + shape_str(x->value.shape()) +
                                " kernel " + shape_str(w->value.shape()));
  d.stride = stride;
  d.pad = pad;
  d.OH = (d.H + 2 * pad - d.KH) / stride + 1;
  d.OW = (d.W + 2 * pad - d.KW) / stride + 1;
  if (d.OH < 1 || d.OW < 1) throw std::invalid_argument("conv2d: output collapses to zero");
  return d;
}

// col layout: (N*OH*OW, KH*KW*C) row-major
void im2col(const Tensor& x, const ConvDims& d, RowMajorMatrix& col) {
  col.setZero(d.N * d.OH * d.OW, d.KH * d.KW * d.C);
  const Scalar* xp = x.data();
  const Index x_row = d.W * d.C;  // stride of one input row
  for (Index n = 0; n < d.N; ++n) {
    const Scalar* xn = xp + n * d.H * x_row;
    for (Index oh = 0; oh < d.OH; ++oh) {
      for (Index ow = 0; ow < d.OW; ++ow) {
        Scalar* crow = col.data() + ((n * d.OH + oh) * d.OW + ow) * col.cols();
        const Index ih0 = oh * d.stride - d.pad;
        const Index iw0 = ow * d.stride - d.pad;
        for (Index kh = 0; kh < d.KH; ++kh) {
          const Index ih = ih0 + kh;
          if (ih < 0 || ih >= d.H) continue;
          Scalar* cdst = crow + kh * d.KW * d.C;
          const Scalar* xsrc = xn + ih * x_row;
          if (iw0 >= 0 && iw0 + d.KW <= d.W) {
            std::memcpy(cdst, xsrc + iw0 * d.C, sizeof(Scalar) * d.KW * d.C);
          } else {
            for (Index kw = 0; kw < d.KW; ++kw) {
              const Index iw = iw0 + kw;
              if (iw < 0 || iw >= d.W) continue;
              std::memcpy(cdst + kw * d.C, xsrc + iw * d.C, sizeof(Scalar) * d.C);
            }
          }
        }
      }
    }
  }
}

// scatter-add of a col-layout gradient back into image layout
void col2im_accum(const RowMajorMatrix& col, const ConvDims& d, Tensor& dx) {
  Scalar* xp = dx.data();
  const Index x_row = d.W * d.C;
  for (Index n = 0; n < d.N; ++n) {
    Scalar* xn = xp + n * d.H * x_row;
    for (Index oh = 0; oh < d.OH; ++oh) {
      for (Index ow = 0; ow < d.OW; ++ow) {
        const Scalar* crow = col.data() + ((n * d.OH + oh) * d.OW + ow) * col.cols();
        const Index ih0 = oh * d.stride - d.pad;
        const Index iw0 = ow * d.stride - d.pad;
        for (Index kh = 0; kh < d.KH; ++kh) {
          const Index ih = ih0 + kh;
          if (ih < 0 || ih >= d.H) continue;
          const Scalar* csrc = crow + kh * d.KW * d.C;
          Scalar* xdst = xn + ih * x_row;
          for (Index kw = 0; kw < d.KW; ++kw) {
            const Index iw = iw0 + kw;
            if (iw < 0 || iw >= d.W) continue;
            Scalar* p = xdst + iw * d.C;
            const Scalar* q = csrc + kw * d.C;
            for (Index c = 0; c < d.C; ++c) p[c] += q[c];
          }
        }
      }
    }
  }
}

}  // namespace

Node* conv2d(Tape& t, Node* x, Node* w, Node* b, Index stride, Index pad) {
  ConvDims d = conv_dims(x, w, stride, pad);
  const Index rows = d.N * d.OH * d.OW;
  const Index kcols = d.KH * d.KW * d.C;

  RowMajorMatrix col;
  im2col(x->value, d, col);

  Tensor out({d.N, d.OH, d.OW, d.Cout});
  auto om = out.as_matrix(rows, d.Cout);
  om.noalias() = col * w->value.as_matrix(kcols, d.Cout);
  if (b) om.rowwise() += b->value.as_matrix(1, d.Cout).row(0);

  Node* n = t.make(std::move(out), {x, w, b});
  if (n->requires_grad)
    n->backprop = [n, x, w, b, d, rows, kcols] {
      auto g = n->grad.as_matrix(rows, d.Cout);
      if (b && b->requires_grad) {
        b->ensure_grad();
        b->grad.as_matrix(1, d.Cout) += g.colwise().sum();
      }
      if (w->requires_grad || x->requires_grad) {
        RowMajorMatrix col;
        if (w->requires_grad) {
          im2col(x->value, d, col);
          w->ensure_grad();
          w->grad.as_matrix(kcols, d.Cout).noalias() += col.transpose() * g;
        }
        if (x->requires_grad) {
          RowMajorMatrix dcol(rows, kcols);
          dcol.noalias() = g * w->value.as_matrix(kcols, d.Cout).transpose();
          x->ensure_grad();
          col2im_accum(dcol, d, x->grad);
        }
      }
    };
  return n;
}

Node* upsample_nearest2(Tape& t, Node* x) {
  if (x->value.rank() != 4) throw std::invalid_argument("upsample_nearest2: input must be NHWC");
  const Index N = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2), C = x->value.dim(3);
  Tensor out({N, 2 * H, 2 * W, C});
  const Scalar* src = x->value.data();
  Scalar* dst = out.data();
  for (Index n = 0; n < N; ++n)
    for (Index h = 0; h < H; ++h)
      for (Index w = 0; w < W; ++w) {
        const Scalar* s = src + ((n * H + h) * W + w) * C;
        for (Index dh = 0; dh < 2; ++dh)
          for (Index dw = 0; dw < 2; ++dw)
            std::memcpy(dst + ((n * 2 * H + 2 * h + dh) * 2 * W + 2 * w + dw) * C, s,
                        sizeof(Scalar) * C);
      }
  Node* n_ = t.make(std::move(out), {x});
  if (n_->requires_grad)
    n_->backprop = [n_, x, N, H, W, C] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      const Scalar* g = n_->grad.data();
      Scalar* dx = x->grad.data();
      for (Index n = 0; n < N; ++n)
        for (Index h = 0; h < H; ++h)
          for (Index w = 0; w < W; ++w) {
            Scalar* d = dx + ((n * H + h) * W + w) * C;
            for (Index dh = 0; dh < 2; ++dh)
              for (Index dw = 0; dw < 2; ++dw) {
                const Scalar* s = g + ((n * 2 * H + 2 * h + dh) * 2 * W + 2 * w + dw) * C;
                for (Index c = 0; c < C; ++c) d[c] += s[c];
              }
          }
    };
  return n_;
}

Node* global_avg_pool(Tape& t, Node* x) {
  if (x->value.rank() != 4) throw std::invalid_argument("global_avg_pool: input must be NHWC");
  const Index N = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2), C = x->value.dim(3);
  const Index hw = H * W;
  Tensor out({N, C});
  auto xm = x->value.as_matrix(N * hw, C);
  auto om = out.as_matrix(N, C);
  for (Index n = 0; n < N; ++n) om.row(n) = xm.middleRows(n * hw, hw).colwise().mean();
  Node* n_ = t.make(std::move(out), {x});
  if (n_->requires_grad)
    n_->backprop = [n_, x, N, hw, C] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      auto gm = n_->grad.as_matrix(N, C);
      auto dxm = x->grad.as_matrix(N * hw, C);
      const Scalar inv = 1.0 / static_cast<Scalar>(hw);
      for (Index n = 0; n < N; ++n)
        dxm.middleRows(n * hw, hw).rowwise() += (gm.row(n) * inv).eval();
    };
  return n_;
}

Node* channel_gate(Tape& t, Node* x, Node* gate) {
  if (x->value.rank() != 4 || gate->value.rank() != 2)
    throw std::invalid_argument("channel_gate: expects NHWC input and (N,C) gate");
  const Index N = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2), C = x->value.dim(3);
  if (gate->value.dim(0) != N || gate->value.dim(1) != C)
    throw std::invalid_argument("channel_gate: gate shape mismatch");
  const Index hw = H * W;
  Tensor out(x->value.shape());
  auto xm = x->value.as_matrix(N * hw, C);
  auto gm = gate->value.as_matrix(N, C);
  auto om = out.as_matrix(N * hw, C);
  for (Index n = 0; n < N; ++n)
    om.middleRows(n * hw, hw) = xm.middleRows(n * hw, hw).array().rowwise() * gm.row(n).array();
  Node* n_ = t.make(std::move(out), {x, gate});
  if (n_->requires_grad)
    n_->backprop = [n_, x, gate, N, hw, C] {
      auto g = n_->grad.as_matrix(N * hw, C);
      if (x->requires_grad) {
        x->ensure_grad();
        auto dxm = x->grad.as_matrix(N * hw, C);
        auto gm = gate->value.as_matrix(N, C);
        for (Index n = 0; n < N; ++n)
          dxm.middleRows(n * hw, hw).array() +=
              g.middleRows(n * hw, hw).array().rowwise() * gm.row(n).array();
      }
      if (gate->requires_grad) {
        gate->ensure_grad();
        auto dgm = gate->grad.as_matrix(N, C);
        auto xm = x->value.as_matrix(N * hw, C);
        for (Index n = 0; n < N; ++n)
          dgm.row(n) += (g.middleRows(n * hw, hw).array() * xm.middleRows(n * hw, hw).array())
                            .colwise()
                            .sum()
                            .matrix();
      }
    };
  return n_;
}

Node* batch_norm(Tape& t, Node* x, Node* gamma, Node* beta, NormMode mode,
                 Tensor* running_mean, Tensor* running_var, Scalar momentum,
                 Scalar eps, bool update_running) {
  const Index C = x->value.shape().back();
  if (gamma->value.size() != C || beta->value.size() != C)
    throw std::invalid_argument("batch_norm: scale/shift width mismatch");
  const Index R = x->value.size() / C;
  auto xm = x->value.as_matrix(R, C);

  Eigen::RowVectorXd mean(C), inv(C);
  if (mode == NormMode::kTrain) {
    mean = xm.colwise().mean();
    Eigen::RowVectorXd var =
        (xm.rowwise() - mean).array().square().colwise().mean();
    inv = (var.array() + eps).rsqrt();
    if (update_running && running_mean && running_var) {
      running_mean->as_matrix(1, C) =
          momentum * running_mean->as_matrix(1, C) + (1.0 - momentum) * mean;
      running_var->as_matrix(1, C) =
          momentum * running_var->as_matrix(1, C) + (1.0 - momentum) * var;
    }
  } else {
    if (!running_mean || !running_var)
      throw std::invalid_argument("batch_norm: eval mode requires running statistics");
    mean = running_mean->as_matrix(1, C).row(0);
    inv = (running_var->as_matrix(1, C).row(0).array() + eps).rsqrt();
  }

  Tensor out(x->value.shape());
  auto om = out.as_matrix(R, C);
  om = ((xm.rowwise() - mean).array().rowwise() * inv.array()).array().rowwise() *
           gamma->value.as_matrix(1, C).row(0).array();
  om.rowwise() += beta->value.as_matrix(1, C).row(0);

  Node* n = t.make(std::move(out), {x, gamma, beta});
  if (n->requires_grad) {
    const bool train = mode == NormMode::kTrain;
    n->backprop = [n, x, gamma, beta, mean, inv, R, C, train] {
      auto g = n->grad.as_matrix(R, C);
      auto xm = x->value.as_matrix(R, C);
      // xhat recomputed from the cached statistics
      RowMajorMatrix xhat = (xm.rowwise() - mean).array().rowwise() * inv.array();
      if (beta->requires_grad) {
        beta->ensure_grad();
        beta->grad.as_matrix(1, C) += g.colwise().sum();
      }
      if (gamma->requires_grad) {
        gamma->ensure_grad();
        gamma->grad.as_matrix(1, C) += (g.array() * xhat.array()).colwise().sum().matrix();
      }
      if (!x->requires_grad) return;
      x->ensure_grad();
      auto dxm = x->grad.as_matrix(R, C);
      RowMajorMatrix dxhat = g.array().rowwise() * gamma->value.as_matrix(1, C).row(0).array();
      if (train) {
        Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
        Eigen::RowVectorXd sum_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().sum();
        const Scalar invR = 1.0 / static_cast<Scalar>(R);
        dxm.array() += ((dxhat * static_cast<Scalar>(R)).rowwise() - sum_dxhat -
                        (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix())
                           .array()
                           .rowwise() *
                       (inv.array() * invR);
      } else {
        dxm.array() += dxhat.array().rowwise() * inv.array();
      }
    };
  }
  return n;
}

Node* select_time(Tape& t, Node* x, Index B, Index T, Index step) {
  if (x->value.dim(0) != B * T) throw std::invalid_argument("select_time: leading dim != B*T");
  if (step < 0 || step >= T) throw std::out_of_range("select_time: step out of range");
  const Index rest = x->value.size() / (B * T);
  Shape out_shape = x->value.shape();
  out_shape[0] = B;
  Tensor out(out_shape);
  for (Index b = 0; b < B; ++b)
    std::memcpy(out.data() + b * rest, x->value.data() + (b * T + step) * rest,
                sizeof(Scalar) * rest);
  Node* n = t.make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [n, x, B, T, step, rest] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (Index b = 0; b < B; ++b) {
        Scalar* dst = x->grad.data() + (b * T + step) * rest;
        const Scalar* src = n->grad.data() + b * rest;
        for (Index i = 0; i < rest; ++i) dst[i] += src[i];
      }
    };
  return n;
}

Node* stack_time(Tape& t, const std::vector<Node*>& steps) {
  if (steps.empty()) throw std::invalid_argument("stack_time: no steps");
  const Index T = static_cast<Index>(steps.size());
  const Index B = steps[0]->value.dim(0);
  const Index rest = steps[0]->value.size() / B;
  for (Node* s : steps)
    if (!s->value.same_shape(steps[0]->value))
      throw std::invalid_argument("stack_time: step shape mismatch");
  Shape out_shape = steps[0]->value.shape();
  out_shape[0] = B * T;
  Tensor out(out_shape);
  for (Index step = 0; step < T; ++step)
    for (Index b = 0; b < B; ++b)
      std::memcpy(out.data() + (b * T + step) * rest, steps[step]->value.data() + b * rest,
                  sizeof(Scalar) * rest);
  Node* n = t.make(std::move(out), steps);
  if (n->requires_grad) {
    std::vector<Node*> ss = steps;
    n->backprop = [n, ss, B, T, rest] {
      for (Index step = 0; step < T; ++step) {
        Node* s = ss[step];
        if (!s->requires_grad) continue;
        s->ensure_grad();
        for (Index b = 0; b < B; ++b) {
          Scalar* dst = s->grad.data() + b * rest;
          const Scalar* src = n->grad.data() + (b * T + step) * rest;
          for (Index i = 0; i < rest; ++i) dst[i] += src[i];
        }
      }
    };
  }
  return n;
}

Node* repeat_time(Tape& t, Node* x, Index T) {
  const Index B = x->value.dim(0);
  const Index rest = x->value.size() / B;
  Shape out_shape = x->value.shape();
  out_shape[0] = B * T;
  Tensor out(out_shape);
  for (Index b = 0; b < B; ++b)
    for (Index step = 0; step < T; ++step)
      std::memcpy(out.data() + (b * T + step) * rest, x->value.data() + b * rest,
                  sizeof(Scalar) * rest);
  Node* n = t.make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [n, x, B, T, rest] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (Index b = 0; b < B; ++b) {
        Scalar* dst = x->grad.data() + b * rest;
        for (Index step = 0; step < T; ++step) {
          const Scalar* src = n->grad.data() + (b * T + step) * rest;
          for (Index i = 0; i < rest; ++i) dst[i] += src[i];
        }
      }
    };
  return n;
}

}  // namespace fitvid
