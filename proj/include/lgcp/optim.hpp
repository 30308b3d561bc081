#ifndef LGCP_OPTIM_HPP
#define LGCP_OPTIM_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_multimin.h>

#include "lgcp/error.hpp"

namespace lgcp {

namespace detail {

struct GslErrorHandlerOff {
  GslErrorHandlerOff() { old_ = gsl_set_error_handler_off(); }
  ~GslErrorHandlerOff() { gsl_set_error_handler(old_); }
  gsl_error_handler_t* old_;
};

template <class F>
double gsl_trampoline(double x, void* params) {
  return (*static_cast<F*>(params))(x);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (21-point) integral of f over [a, b].
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-8,
                 double rel_tol = 1e-10) {
  if (a == b) return 0.0;
  using Fn = std::remove_reference_t<F>;
  detail::GslErrorHandlerOff guard;
  constexpr std::size_t kLimit = 1000;
  std::unique_ptr<gsl_integration_workspace, void (*)(gsl_integration_workspace*)>
      ws(gsl_integration_workspace_alloc(kLimit), gsl_integration_workspace_free);
  gsl_function fn;
  fn.function = &detail::gsl_trampoline<Fn>;
  fn.params = const_cast<void*>(static_cast<const void*>(&f));
  double result = 0.0, err = 0.0;
  const int status = gsl_integration_qag(&fn, a, b, abs_tol, rel_tol, kLimit,
                                         GSL_INTEG_GAUSS21, ws.get(), &result, &err);
  if (status != GSL_SUCCESS && status != GSL_EROUND)
    throw NumericalError(std::string("quadrature failed: ") + gsl_strerror(status));
  return result;
}

struct MinimizeResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  double initial_step = 0.5;
  double size_tol = 1e-8;
  int max_iterations = 5000;
};

/// Minimise f over R^d by the Nelder-Mead simplex (GSL nmsimplex2).
/// Non-finite objective values are treated as +1e300.
inline MinimizeResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& start, const NelderMeadOptions& opt = {}) {
  const std::size_t d = start.size();
  MinimizeResult out;
  if (d == 0) {
    out.x = start;
    out.value = f(start);
    out.converged = true;
    return out;
  }
  struct Ctx {
    const std::function<double(const std::vector<double>&)>* f;
    std::vector<double> buf;
  } ctx{&f, std::vector<double>(d)};
  gsl_multimin_function fn;
  fn.n = d;
  fn.params = &ctx;
  fn.f = [](const gsl_vector* v, void* p) -> double {
    auto* c = static_cast<Ctx*>(p);
    for (std::size_t i = 0; i < c->buf.size(); ++i) c->buf[i] = gsl_vector_get(v, i);
    const double val = (*c->f)(c->buf);
    return std::isfinite(val) ? val : 1e300;
  };
  detail::GslErrorHandlerOff guard;
  std::unique_ptr<gsl_vector, void (*)(gsl_vector*)> x(gsl_vector_alloc(d),
                                                       gsl_vector_free);
  std::unique_ptr<gsl_vector, void (*)(gsl_vector*)> step(gsl_vector_alloc(d),
                                                          gsl_vector_free);
  for (std::size_t i = 0; i < d; ++i) gsl_vector_set(x.get(), i, start[i]);
  gsl_vector_set_all(step.get(), opt.initial_step);
  std::unique_ptr<gsl_multimin_fminimizer, void (*)(gsl_multimin_fminimizer*)> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, d),
      gsl_multimin_fminimizer_free);
  gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), step.get());
  int status = GSL_CONTINUE;
  int iter = 0;
  while (status == GSL_CONTINUE && iter < opt.max_iterations) {
    ++iter;
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()),
                                    opt.size_tol);
  }
  out.x.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.x[i] = gsl_vector_get(s->x, i);
  out.value = s->fval;
  out.iterations = iter;
  out.converged = status == GSL_SUCCESS;
  // Never return something worse than the start.
  const double f0 = f(start);
  if (std::isfinite(f0) && f0 < out.value) {
    out.x = start;
    out.value = f0;
  }
  return out;
}

}  // namespace lgcp

#endif  // LGCP_OPTIM_HPP
