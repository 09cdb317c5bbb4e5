#include "pssl/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace pssl::ad {

namespace {

std::uint64_t next_order() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

void accum(Node& p, const Matrix& g) {
  if (!p.requires_grad) return;
  if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
  p.grad += g;
}

Var make(Matrix value, std::vector<NodePtr> parents, std::function<void(Node&)> pull) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->pull = std::move(pull);
  n->order = next_order();
  for (const auto& p : n->parents) n->requires_grad = n->requires_grad || p->requires_grad;
  return Var(std::move(n));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  check_arg(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
            std::string(op) + ": shape mismatch");
}

}  // namespace

Var leaf(Matrix v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  n->order = next_order();
  return Var(std::move(n));
}

Var constant(Matrix v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->order = next_order();
  return Var(std::move(n));
}

Var stopgrad(const Var& v) { return constant(v.value()); }

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a.node(), b.node()}, [](Node& n) {
    accum(*n.parents[0], n.grad);
    accum(*n.parents[1], n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a.node(), b.node()}, [](Node& n) {
    accum(*n.parents[0], n.grad);
    accum(*n.parents[1], -n.grad);
  });
}

Var hadamard(const Var& a, const Var& b) {
  check_same_shape(a, b, "hadamard");
  return make(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](Node& n) {
    accum(*n.parents[0], n.grad.cwiseProduct(n.parents[1]->value));
    accum(*n.parents[1], n.grad.cwiseProduct(n.parents[0]->value));
  });
}

Var scale(const Var& a, double c) {
  return make(a.value() * c, {a.node()}, [c](Node& n) { accum(*n.parents[0], n.grad * c); });
}

Var add_scalar(const Var& a, double c) {
  Matrix y = a.value();
  y.array() += c;
  return make(std::move(y), {a.node()}, [](Node& n) { accum(*n.parents[0], n.grad); });
}

Var matmul(const Var& a, const Var& b) {
  check_arg(a.value().cols() == b.value().rows(), "matmul: inner dimensions differ");
  return make(a.value() * b.value(), {a.node(), b.node()}, [](Node& n) {
    accum(*n.parents[0], n.grad * n.parents[1]->value.transpose());
    accum(*n.parents[1], n.parents[0]->value.transpose() * n.grad);
  });
}

Var matmul_tn(const Var& a, const Var& b) {
  check_arg(a.value().rows() == b.value().rows(), "matmul_tn: row counts differ");
  return make(a.value().transpose() * b.value(), {a.node(), b.node()}, [](Node& n) {
    accum(*n.parents[0], n.parents[1]->value * n.grad.transpose());
    accum(*n.parents[1], n.parents[0]->value * n.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  check_arg(a.value().cols() == b.value().cols(), "matmul_nt: column counts differ");
  return make(a.value() * b.value().transpose(), {a.node(), b.node()}, [](Node& n) {
    accum(*n.parents[0], n.grad * n.parents[1]->value);
    accum(*n.parents[1], n.grad.transpose() * n.parents[0]->value);
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  check_arg(x.value().cols() == w.value().rows(), "linear: input width mismatch");
  check_arg(b.value().rows() == 1 && b.value().cols() == w.value().cols(),
            "linear: bias shape mismatch");
  Matrix y = x.value() * w.value();
  y.rowwise() += b.value().row(0);
  return make(std::move(y), {x.node(), w.node(), b.node()}, [](Node& n) {
    accum(*n.parents[0], n.grad * n.parents[1]->value.transpose());
    accum(*n.parents[1], n.parents[0]->value.transpose() * n.grad);
    accum(*n.parents[2], n.grad.colwise().sum());
  });
}

Var relu(const Var& a) {
  return make(a.value().cwiseMax(0.0), {a.node()}, [](Node& n) {
    const Matrix mask = (n.parents[0]->value.array() > 0.0).cast<double>().matrix();
    accum(*n.parents[0], n.grad.cwiseProduct(mask));
  });
}

Var concat_rows(const Var& a, const Var& b) {
  check_arg(a.value().cols() == b.value().cols(), "concat_rows: column counts differ");
  Matrix y(a.value().rows() + b.value().rows(), a.value().cols());
  y.topRows(a.value().rows()) = a.value();
  y.bottomRows(b.value().rows()) = b.value();
  return make(std::move(y), {a.node(), b.node()}, [](Node& n) {
    const auto ra = n.parents[0]->value.rows();
    accum(*n.parents[0], n.grad.topRows(ra));
    accum(*n.parents[1], n.grad.bottomRows(n.grad.rows() - ra));
  });
}

Var sum_all(const Var& a) {
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return make(std::move(y), {a.node()}, [](Node& n) {
    const auto& p = n.parents[0]->value;
    accum(*n.parents[0], Matrix::Constant(p.rows(), p.cols(), n.grad(0, 0)));
  });
}

Var center_columns(const Var& a) {
  Matrix y = a.value();
  y.rowwise() -= a.value().colwise().mean();
  return make(std::move(y), {a.node()}, [](Node& n) {
    Matrix g = n.grad;
    g.rowwise() -= n.grad.colwise().mean();
    accum(*n.parents[0], g);
  });
}

Var standardize_columns(const Var& a, double var_floor) {
  const Matrix& x = a.value();
  const auto b = static_cast<double>(x.rows());
  RowVector mu = x.colwise().mean();
  Matrix centered = x.rowwise() - mu;
  RowVector sigma =
      (centered.array().square().colwise().sum() / b + var_floor).sqrt().matrix();
  Matrix y = (centered.array().rowwise() / sigma.array()).matrix();
  return make(std::move(y), {a.node()}, [sigma, b](Node& n) {
    // Batch-norm style backward with biased variance:
    //   dx = (g - mean(g) - y * mean(g .* y)) / sigma, per column.
    const Matrix& y = n.value;
    RowVector mg = n.grad.colwise().mean();
    RowVector mgy = (n.grad.cwiseProduct(y).colwise().sum() / b).matrix();
    Matrix g = n.grad;
    g.rowwise() -= mg;
    g.array() -= y.array().rowwise() * mgy.array();
    g.array().rowwise() /= sigma.array();
    accum(*n.parents[0], g);
  });
}

Var l2_normalize_rows(const Var& a) {
  const Matrix& x = a.value();
  Matrix y = x;
  Vector norms = Vector::Zero(x.rows());
  std::vector<char> pass(static_cast<std::size_t>(x.rows()), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double sq = x.row(i).squaredNorm();
    if (sq == 0.0 || std::abs(sq - 1.0) < 1e-12) {
      pass[static_cast<std::size_t>(i)] = 1;  // zero or already-unit rows pass through
      norms(i) = 1.0;
    } else {
      norms(i) = std::sqrt(sq);
      y.row(i) /= norms(i);
    }
  }
  return make(std::move(y), {a.node()}, [norms, pass](Node& n) {
    Matrix g(n.grad.rows(), n.grad.cols());
    for (Eigen::Index i = 0; i < n.grad.rows(); ++i) {
      if (pass[static_cast<std::size_t>(i)]) {
        g.row(i) = n.grad.row(i);
      } else {
        const double dot = n.grad.row(i).dot(n.value.row(i));
        g.row(i) = (n.grad.row(i) - dot * n.value.row(i)) / norms(i);
      }
    }
    accum(*n.parents[0], g);
  });
}

Var cholesky(const Var& a) {
  check_arg(a.value().rows() == a.value().cols(), "cholesky: matrix not square");
  Eigen::LLT<Matrix> llt(a.value());
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("cholesky: matrix not positive definite");
  Matrix l = llt.matrixL();
  return make(std::move(l), {a.node()}, [](Node& n) {
    const Matrix& l = n.value;
    Matrix g_lower = n.grad;
    g_lower.triangularView<Eigen::StrictlyUpper>().setZero();
    Matrix m = l.transpose() * g_lower;
    m.triangularView<Eigen::StrictlyUpper>().setZero();
    m.diagonal() *= 0.5;
    // C_bar = sym(L^{-T} m L^{-1})
    Matrix x = l.transpose().triangularView<Eigen::Upper>().solve(m);
    Matrix st = l.transpose().triangularView<Eigen::Upper>().solve(Matrix(x.transpose()));
    Matrix s = st.transpose();
    accum(*n.parents[0], 0.5 * (s + s.transpose()));
  });
}

Var solve_right_lt(const Var& x, const Var& l) {
  check_arg(l.value().rows() == l.value().cols() && x.value().cols() == l.value().rows(),
            "solve_right_lt: shape mismatch");
  Matrix yt = l.value().triangularView<Eigen::Lower>().solve(Matrix(x.value().transpose()));
  return make(yt.transpose(), {x.node(), l.node()}, [](Node& n) {
    const Matrix& l = n.parents[1]->value;
    Matrix zt =
        l.transpose().triangularView<Eigen::Upper>().solve(Matrix(n.grad.transpose()));
    accum(*n.parents[0], zt.transpose());  // x_bar = g L^{-1}
    accum(*n.parents[1], -(zt * n.value));  // L_bar = -x_bar^T Y (lower part read downstream)
  });
}

Var ntxent_pair_loss(const Var& sims, int batch, double tau) {
  const Matrix& s = sims.value();
  const Eigen::Index n2 = s.rows();
  check_arg(n2 == s.cols() && n2 == 2 * batch, "ntxent_pair_loss: similarity matrix must be 2Bx2B");
  check_arg(tau > 0.0, "ntxent_pair_loss: temperature must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n2; ++i) {
    const Eigen::Index pos = (i + batch) % n2;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n2; ++k)
      if (k != i) mx = std::max(mx, s(i, k) / tau);
    double z = 0.0;
    for (Eigen::Index k = 0; k < n2; ++k)
      if (k != i) z += std::exp(s(i, k) / tau - mx);
    total += mx + std::log(z) - s(i, pos) / tau;
  }
  Matrix y(1, 1);
  y(0, 0) = total / static_cast<double>(n2);
  return make(std::move(y), {sims.node()}, [batch, tau](Node& n) {
    const Matrix& s = n.parents[0]->value;
    const Eigen::Index n2 = s.rows();
    const double g = n.grad(0, 0) / (static_cast<double>(n2) * tau);
    Matrix ds = Matrix::Zero(n2, n2);
    for (Eigen::Index i = 0; i < n2; ++i) {
      const Eigen::Index pos = (i + batch) % n2;
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < n2; ++k)
        if (k != i) mx = std::max(mx, s(i, k) / tau);
      double z = 0.0;
      for (Eigen::Index k = 0; k < n2; ++k)
        if (k != i) z += std::exp(s(i, k) / tau - mx);
      for (Eigen::Index k = 0; k < n2; ++k) {
        if (k == i) continue;
        const double w = std::exp(s(i, k) / tau - mx) / z;
        ds(i, k) += g * (w - (k == pos ? 1.0 : 0.0));
      }
    }
    accum(*n.parents[0], ds);
  });
}

Var softmax_xent(const Var& logits, std::vector<int> labels) {
  const Matrix& z = logits.value();
  check_arg(static_cast<Eigen::Index>(labels.size()) == z.rows(),
            "softmax_xent: one label per row required");
  for (int y : labels)
    check_arg(y >= 0 && y < z.cols(), "softmax_xent: label out of range");
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    total += lse - z(i, labels[static_cast<std::size_t>(i)]);
  }
  Matrix y(1, 1);
  y(0, 0) = total / static_cast<double>(z.rows());
  return make(std::move(y), {logits.node()}, [labels = std::move(labels)](Node& n) {
    const Matrix& z = n.parents[0]->value;
    const double g = n.grad(0, 0) / static_cast<double>(z.rows());
    Matrix dz(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double mx = z.row(i).maxCoeff();
      RowVector e = (z.row(i).array() - mx).exp();
      dz.row(i) = g * (e / e.sum());
      dz(i, labels[static_cast<std::size_t>(i)]) -= g;
    }
    accum(*n.parents[0], dz);
  });
}

Var barlow_penalty(const Var& cross, double lambda) {
  const Matrix& c = cross.value();
  check_arg(c.rows() == c.cols(), "barlow_penalty: cross-correlation must be square");
  double on = 0.0, off = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (i == j)
        on += (1.0 - c(i, i)) * (1.0 - c(i, i));
      else
        off += c(i, j) * c(i, j);
    }
  }
  Matrix y(1, 1);
  y(0, 0) = on + lambda * off;
  return make(std::move(y), {cross.node()}, [lambda](Node& n) {
    const Matrix& c = n.parents[0]->value;
    const double g = n.grad(0, 0);
    Matrix dc(c.rows(), c.cols());
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      for (Eigen::Index j = 0; j < c.cols(); ++j)
        dc(i, j) = (i == j) ? g * (-2.0) * (1.0 - c(i, i)) : g * 2.0 * lambda * c(i, j);
    accum(*n.parents[0], dc);
  });
}

void backward(const Var& root) {
  check_arg(static_cast<bool>(root), "backward: empty Var");
  check_arg(root.value().rows() == 1 && root.value().cols() == 1, "backward: root must be 1x1");
  std::vector<Node*> reachable;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    reachable.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  for (Node* n : reachable) n->grad.resize(0, 0);
  std::sort(reachable.begin(), reachable.end(),
            [](const Node* a, const Node* b) { return a->order > b->order; });
  root.node()->grad = Matrix::Ones(1, 1);
  for (Node* n : reachable) {
    if (!n->pull || n->grad.size() == 0 || !n->requires_grad) continue;
    n->pull(*n);
  }
}

}  // namespace pssl::ad
