#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tubelet/core/tape.hpp"
#include "tubelet/core/tensor.hpp"
#include "tubelet/core/threading.hpp"

namespace tubelet::core {

struct NamedTensorD {
  std::string name;
  TensorD value;
};

// Builds a scalar loss on the given tape from the registered parameter ids
// (one id per entry of the params vector, same order).
using LossBuilderD = std::function<TapeD::Id(TapeD&, const std::vector<TapeD::Id>&)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_name;
  int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients against central finite differences,
// step 1e-3, in double precision. Returns the worst relative error over all
// parameter entries. Single-precision differences are too noisy at the 1e-4
// tolerance this artifact tests at, hence the double-only signature.
inline GradCheckReport check_gradients(const LossBuilderD& build,
                                       const std::vector<NamedTensorD>& params,
                                       double step = 1e-3) {
  // analytic pass
  std::vector<TensorD> analytic;
  {
    TapeD tape;
    std::vector<TapeD::Id> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(tape.param(p.value));
    TapeD::Id loss = build(tape, ids);
    tape.backward(loss);
    for (auto id : ids) analytic.push_back(tape.grad(id));
  }

  auto eval_at = [&](const std::vector<NamedTensorD>& pt) {
    TapeD tape;
    std::vector<TapeD::Id> ids;
    ids.reserve(pt.size());
    for (const auto& p : pt) ids.push_back(tape.input(p.value));
    return static_cast<double>(tape.value(build(tape, ids)).data[0]);
  };

  // global entry index -> (param, offset)
  std::vector<std::pair<size_t, int64_t>> entries;
  for (size_t p = 0; p < params.size(); ++p) {
    for (int64_t i = 0; i < params[p].value.numel(); ++i) entries.emplace_back(p, i);
  }

  const int64_t n_entries = static_cast<int64_t>(entries.size());
  std::vector<double> rel(static_cast<size_t>(n_entries), 0.0);
  std::vector<double> numeric(static_cast<size_t>(n_entries), 0.0);

  parallel_for(n_entries, 1, [&](int64_t e0, int64_t e1) {
    std::vector<NamedTensorD> local = params;  // private copy per chunk
    for (int64_t e = e0; e < e1; ++e) {
      const auto [p, i] = entries[static_cast<size_t>(e)];
      double& slot = local[p].value.data[static_cast<size_t>(i)];
      const double orig = slot;
      slot = orig + step;
      const double f_plus = eval_at(local);
      slot = orig - step;
      const double f_minus = eval_at(local);
      slot = orig;
      const double fd = (f_plus - f_minus) / (2.0 * step);
      const double an = analytic[p].data[static_cast<size_t>(i)];
      numeric[static_cast<size_t>(e)] = fd;
      rel[static_cast<size_t>(e)] =
          std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
    }
  });

  GradCheckReport rep;
  for (int64_t e = 0; e < n_entries; ++e) {
    if (rel[static_cast<size_t>(e)] >= rep.max_rel_err) {
      const auto [p, i] = entries[static_cast<size_t>(e)];
      rep.max_rel_err = rel[static_cast<size_t>(e)];
      rep.worst_name = params[p].name;
      rep.worst_index = i;
      rep.analytic = analytic[p].data[static_cast<size_t>(i)];
      rep.numeric = numeric[static_cast<size_t>(e)];
    }
  }
  return rep;
}

}  // namespace tubelet::core
