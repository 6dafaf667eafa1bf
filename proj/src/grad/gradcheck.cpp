#include "nsslab/grad/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <memory>

#include "nsslab/grad/ops.hpp"
#include "nsslab/random.hpp"

namespace nsslab::grad {

GradcheckResult check_gradient(const LossBuilder& build, const std::vector<Tensor*>& params,
                               double h) {
  GradcheckResult result;
  for (Tensor* p : params) p->set_requires_grad(true);
  zero_grads(params);
  {
    Tape tape;
    backward(tape, build(tape));
  }
  for (Tensor* p : params) result.analytic.push_back(p->grad_flat());

  for (Tensor* p : params) {
    Eigen::VectorXd fd(p->size());
    for (Index i = 0; i < p->size(); ++i) {
      const double saved = p->flat()[i];
      p->flat()[i] = saved + h;
      Tape plus;
      const double fp = build(plus).value().item();
      p->flat()[i] = saved - h;
      Tape minus;
      const double fm = build(minus).value().item();
      p->flat()[i] = saved;
      fd[i] = (fp - fm) / (2.0 * h);
    }
    result.numeric.push_back(std::move(fd));
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    const double scale =
        std::max({result.analytic[k].norm(), result.numeric[k].norm(), 1e-10});
    result.max_rel_error =
        std::max(result.max_rel_error, (result.analytic[k] - result.numeric[k]).norm() / scale);
  }
  return result;
}

namespace {

struct Instance {
  std::vector<std::unique_ptr<Tensor>> owned;
  std::vector<Tensor*> params;
  LossBuilder build;

  Tensor& param(std::vector<Index> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    auto t = std::make_unique<Tensor>(std::move(shape));
    for (Index i = 0; i < t->size(); ++i) t->flat()[i] = rng.uniform(lo, hi);
    t->set_requires_grad(true);
    params.push_back(t.get());
    owned.push_back(std::move(t));
    return *owned.back();
  }
};

Tensor random_tensor(std::vector<Index> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.flat()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// Reduces any output to a scalar through mse against a fixed random target.
Var reduce(Tape& tape, Var out, const Tensor& target) { return mse(out, tape.constant(target)); }

using Factory = std::function<Instance(Rng&)>;

std::vector<std::pair<std::string, Factory>> primitive_factories() {
  std::vector<std::pair<std::string, Factory>> f;

  f.emplace_back("matmul", [](Rng& rng) {
    Instance in;
    Tensor& a = in.param({3, 4}, rng);
    Tensor& b = in.param({4, 2}, rng);
    Tensor target = random_tensor({3, 2}, rng);
    in.build = [&a, &b, target](Tape& t) { return reduce(t, matmul(t.leaf(a), t.leaf(b)), target); };
    return in;
  });
  f.emplace_back("matvec", [](Rng& rng) {
    Instance in;
    Tensor& a = in.param({3, 4}, rng);
    Tensor& x = in.param({4}, rng);
    Tensor target = random_tensor({3}, rng);
    in.build = [&a, &x, target](Tape& t) { return reduce(t, matvec(t.leaf(a), t.leaf(x)), target); };
    return in;
  });
  auto binary = [&f](const std::string& name, Var (*op)(Var, Var), double lo, double hi) {
    f.emplace_back(name, [op, lo, hi](Rng& rng) {
      Instance in;
      Tensor& a = in.param({2, 3}, rng);
      Tensor& b = in.param({2, 3}, rng, lo, hi);
      Tensor target = random_tensor({2, 3}, rng);
      in.build = [&a, &b, target, op](Tape& t) { return reduce(t, op(t.leaf(a), t.leaf(b)), target); };
      return in;
    });
  };
  binary("add", &add, -1.0, 1.0);
  binary("sub", &sub, -1.0, 1.0);
  binary("mul", &mul, -1.0, 1.0);
  binary("div", &div, 0.5, 1.5);
  f.emplace_back("scale", [](Rng& rng) {
    Instance in;
    Tensor& s = in.param({}, rng);
    Tensor& a = in.param({2, 3}, rng);
    Tensor target = random_tensor({2, 3}, rng);
    in.build = [&s, &a, target](Tape& t) { return reduce(t, scale(t.leaf(s), t.leaf(a)), target); };
    return in;
  });
  f.emplace_back("scale_const", [](Rng& rng) {
    Instance in;
    Tensor& a = in.param({2, 3}, rng);
    const double c = rng.uniform(-2.0, 2.0);
    Tensor target = random_tensor({2, 3}, rng);
    in.build = [&a, c, target](Tape& t) { return reduce(t, scale(t.leaf(a), c), target); };
    return in;
  });
  auto unary = [&f](const std::string& name, Var (*op)(Var)) {
    f.emplace_back(name, [op](Rng& rng) {
      Instance in;
      Tensor& a = in.param({3, 3}, rng, -3.0, 3.0);
      Tensor target = random_tensor({3, 3}, rng);
      in.build = [&a, target, op](Tape& t) { return reduce(t, op(t.leaf(a)), target); };
      return in;
    });
  };
  unary("sigmoid", &sigmoid);
  unary("gelu", &gelu);
  unary("exp", &exp);
  auto conv = [&f](const std::string& name, Padding padding) {
    f.emplace_back(name, [padding](Rng& rng) {
      Instance in;
      const Index batch = 2, steps = 5, tau = 3;
      Tensor& x = in.param({2, steps * batch}, rng);
      Tensor& w = in.param({3, 2, tau}, rng);
      Tensor& b = in.param({3}, rng);
      Tensor target = random_tensor({3, steps * batch}, rng);
      in.build = [&x, &w, &b, target, padding](Tape& t) {
        Conv1dOptions opt;
        opt.batch = batch;
        opt.padding = padding;
        return reduce(t, conv1d_causal(t.leaf(x), t.leaf(w), t.leaf(b), opt), target);
      };
      return in;
    });
  };
  conv("conv1d_causal", Padding::kZero);
  conv("conv1d_causal_replicate", Padding::kReplicateFirst);
  f.emplace_back("mse", [](Rng& rng) {
    Instance in;
    Tensor& a = in.param({2, 4}, rng);
    Tensor& b = in.param({2, 4}, rng);
    in.build = [&a, &b](Tape& t) { return mse(t.leaf(a), t.leaf(b)); };
    return in;
  });
  f.emplace_back("slice_cols", [](Rng& rng) {
    Instance in;
    Tensor& a = in.param({3, 6}, rng);
    Tensor target = random_tensor({3, 2}, rng);
    in.build = [&a, target](Tape& t) { return reduce(t, slice_cols(t.leaf(a), 2, 2), target); };
    return in;
  });
  f.emplace_back("concat_cols", [](Rng& rng) {
    Instance in;
    Tensor& a = in.param({2, 2}, rng);
    Tensor& b = in.param({2, 3}, rng);
    Tensor target = random_tensor({2, 5}, rng);
    in.build = [&a, &b, target](Tape& t) {
      const std::array<Var, 2> parts{t.leaf(a), t.leaf(b)};
      return reduce(t, concat_cols(parts), target);
    };
    return in;
  });
  f.emplace_back("broadcast_cols", [](Rng& rng) {
    Instance in;
    Tensor& v = in.param({3}, rng);
    Tensor target = random_tensor({3, 4}, rng);
    in.build = [&v, target](Tape& t) { return reduce(t, broadcast_cols(t.leaf(v), 4), target); };
    return in;
  });
  f.emplace_back("solve", [](Rng& rng) {
    Instance in;
    Tensor& m = in.param({3, 3}, rng);
    for (Index i = 0; i < 3; ++i) m.matrix()(i, i) += 3.0;
    Tensor& r = in.param({3, 2}, rng);
    Tensor target = random_tensor({3, 2}, rng);
    in.build = [&m, &r, target](Tape& t) { return reduce(t, solve(t.leaf(m), t.leaf(r)), target); };
    return in;
  });
  f.emplace_back("composite_3layer", [](Rng& rng) {
    Instance in;
    Tensor& w1 = in.param({4, 3}, rng);
    Tensor& w2 = in.param({4, 4}, rng);
    Tensor& w3 = in.param({2, 4}, rng);
    Tensor x = random_tensor({3, 5}, rng);
    Tensor target = random_tensor({2, 5}, rng);
    in.build = [&w1, &w2, &w3, x, target](Tape& t) {
      Var h = sigmoid(matmul(t.leaf(w1), t.constant(x)));
      h = gelu(matmul(t.leaf(w2), h));
      return reduce(t, matmul(t.leaf(w3), h), target);
    };
    return in;
  });
  return f;
}

}  // namespace

std::vector<PrimitiveCheck> run_primitive_suite(const GradcheckOptions& options) {
  std::vector<PrimitiveCheck> rows;
  const auto factories = primitive_factories();
  for (std::size_t k = 0; k < factories.size(); ++k) {
    const auto& [name, make] = factories[k];
    PrimitiveCheck row{name, options.instances, 0.0, true};
    for (int i = 0; i < options.instances; ++i) {
      Rng rng = Rng::stream(options.seed, k * 100003 + static_cast<std::uint64_t>(i));
      Instance inst = make(rng);
      GradcheckResult r = check_gradient(inst.build, inst.params, options.h);
      if (name == options.corrupt) {
        // Fault injection: pretend the backward rule returned 1.5x the gradient.
        double worst = 0.0;
        for (std::size_t p = 0; p < r.analytic.size(); ++p) {
          const Eigen::VectorXd bad = 1.5 * r.analytic[p];
          const double scale = std::max({bad.norm(), r.numeric[p].norm(), 1e-10});
          worst = std::max(worst, (bad - r.numeric[p]).norm() / scale);
        }
        r.max_rel_error = worst;
      }
      row.max_rel_error = std::max(row.max_rel_error, r.max_rel_error);
    }
    row.passed = row.max_rel_error < options.tolerance;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace nsslab::grad
