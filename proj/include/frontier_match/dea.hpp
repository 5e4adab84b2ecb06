#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "frontier_match/csv.hpp"
#include "frontier_match/errors.hpp"

namespace frontier_match::dea {

enum class Scope { common, by_group };

inline const char* to_string(Scope s) { return s == Scope::common ? "common" : "by_group"; }

// One decision-making unit: inputs are the achieved values to be contracted
// radially, outputs are the targets that must be maintained.
struct FrontierUnit {
  std::string unit_id;
  std::vector<double> inputs;
  std::vector<double> outputs;
};

struct FrontierSample {
  std::vector<FrontierUnit> units;
  std::size_t n_inputs = 0;
  std::size_t n_outputs = 0;
  Scope scope = Scope::common;
  std::vector<std::string> groups;  // per-unit label, required when scope == by_group

  void validate() const {
    if (units.empty()) throw validation_error("frontier sample is empty");
    if (n_inputs == 0 || n_outputs == 0)
      throw validation_error("frontier sample needs at least one input and one output");
    for (const auto& u : units) {
      if (u.inputs.size() != n_inputs || u.outputs.size() != n_outputs)
        throw validation_error("unit '" + u.unit_id + "': input/output dimension mismatch");
      for (double v : u.inputs)
        if (!(v > 0.0) || !std::isfinite(v))
          throw validation_error("unit '" + u.unit_id + "': inputs must be positive finite");
      for (double v : u.outputs)
        if (!(v > 0.0) || !std::isfinite(v))
          throw validation_error("unit '" + u.unit_id + "': outputs must be positive finite");
    }
    if (scope == Scope::by_group && groups.size() != units.size())
      throw validation_error("by_group scope requires one group label per unit");
  }
};

struct EfficiencyScore {
  std::string unit_id;
  double score = 0.0;
  std::vector<std::string> binding_peers;  // sorted unit ids with positive intensity
};

namespace detail {

constexpr double k_opt_tol = 1e-9;    // feasibility/optimality tolerance
constexpr double k_pivot_tol = 1e-11; // smallest admissible pivot element
constexpr double k_peer_tol = 1e-7;   // intensity threshold for binding peers

// Dense two-phase simplex for the input-oriented CRS envelopment program
//
//   min theta  s.t.  sum_j gamma_j x_j <= theta x0   (N rows)
//                    sum_j gamma_j y_j >= y0         (M rows)
//                    gamma >= 0
//
// Rows are pre-normalised by the target's coordinates, which makes the
// program invariant under per-coordinate rescaling of the data. Variables
// are [theta, gamma_1..gamma_F, slacks_N, surpluses_M, artificials_M].
class EnvelopmentLp {
public:
  EnvelopmentLp(const std::vector<const FrontierUnit*>& reference,
                const FrontierUnit& target, std::size_t n_in, std::size_t n_out)
      : n_rows_(n_in + n_out),
        n_ref_(reference.size()),
        n_in_(n_in),
        n_out_(n_out),
        n_cols_(1 + reference.size() + n_in + n_out + n_out),
        art_begin_(1 + reference.size() + n_in + n_out),
        tableau_((n_in + n_out) * (1 + reference.size() + n_in + n_out + n_out + 1), 0.0),
        basis_(n_in + n_out),
        obj_(1 + reference.size() + n_in + n_out + n_out + 1, 0.0),
        obj1_(1 + reference.size() + n_in + n_out + n_out + 1, 0.0) {
    // input rows: -theta + sum gamma_j (x_jk / x0_k) + s_k = 0
    for (std::size_t k = 0; k < n_in_; ++k) {
      at(k, 0) = -1.0;
      for (std::size_t j = 0; j < n_ref_; ++j)
        at(k, 1 + j) = reference[j]->inputs[k] / target.inputs[k];
      at(k, 1 + n_ref_ + k) = 1.0;
      basis_[k] = 1 + n_ref_ + k;
    }
    // output rows: sum gamma_j (y_jm / y0_m) - u_m + a_m = 1
    for (std::size_t m = 0; m < n_out_; ++m) {
      const std::size_t r = n_in_ + m;
      for (std::size_t j = 0; j < n_ref_; ++j)
        at(r, 1 + j) = reference[j]->outputs[m] / target.outputs[m];
      at(r, 1 + n_ref_ + n_in_ + m) = -1.0;
      at(r, art_begin_ + m) = 1.0;
      rhs(r) = 1.0;
      basis_[r] = art_begin_ + m;
    }
    // phase-2 reduced costs: minimise theta (basic costs are all zero)
    obj_[0] = 1.0;
    // phase-1 reduced costs: minimise the artificial sum, artificials basic
    for (std::size_t j = 0; j <= n_cols_; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < n_out_; ++m) s += at(n_in_ + m, j);
      obj1_[j] = -s;
    }
    for (std::size_t m = 0; m < n_out_; ++m) obj1_[art_begin_ + m] = 0.0;
  }

  // Returns optimal theta; fills gamma with intensities over the reference.
  double solve(std::vector<double>& gamma) {
    run_phase(obj1_, /*allow_artificials=*/true);
    if (-obj1_[n_cols_] > 1e-7)
      throw numeric_error("envelopment program infeasible: target lies outside the "
                          "cone spanned by the reference set");
    run_phase(obj_, /*allow_artificials=*/false);

    gamma.assign(n_ref_, 0.0);
    double theta = 0.0;
    for (std::size_t r = 0; r < n_rows_; ++r) {
      const std::size_t b = basis_[r];
      if (b == 0) theta = rhs(r);
      else if (b >= 1 && b < 1 + n_ref_) gamma[b - 1] = rhs(r);
    }
    if (!(theta > 0.0))
      throw numeric_error("envelopment solve produced a non-positive score");
    return theta;
  }

private:
  double& at(std::size_t r, std::size_t c) { return tableau_[r * (n_cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return tableau_[r * (n_cols_ + 1) + n_cols_]; }

  void run_phase(std::vector<double>& obj, bool allow_artificials) {
    const std::size_t bland_after = 200 + 20 * (n_rows_ + n_cols_);
    for (std::size_t iter = 0;; ++iter) {
      if (iter > 10000)
        throw numeric_error("envelopment simplex failed to terminate");
      const bool bland = iter > bland_after;
      // entering column: most negative reduced cost (Bland: first negative)
      std::size_t enter = n_cols_;
      double best = -k_opt_tol;
      for (std::size_t j = 0; j < n_cols_; ++j) {
        if (!allow_artificials && j >= art_begin_) break;
        if (obj[j] < best) {
          best = obj[j];
          enter = j;
          if (bland) break;
        }
      }
      if (enter == n_cols_) return;  // optimal
      // ratio test; ties broken by smallest basis variable index
      std::size_t leave = n_rows_;
      double best_ratio = 0.0;
      for (std::size_t r = 0; r < n_rows_; ++r) {
        const double a = at(r, enter);
        if (a <= k_pivot_tol) continue;
        const double ratio = rhs(r) / a;
        if (leave == n_rows_ || ratio < best_ratio - k_pivot_tol ||
            (ratio < best_ratio + k_pivot_tol && basis_[r] < basis_[leave])) {
          leave = r;
          best_ratio = ratio;
        }
      }
      if (leave == n_rows_)
        throw numeric_error("envelopment program unbounded; data must be positive");
      pivot(leave, enter);
    }
  }

  void pivot(std::size_t r, std::size_t c) {
    const double inv = 1.0 / at(r, c);
    for (std::size_t j = 0; j <= n_cols_; ++j) at(r, j) *= inv;
    at(r, c) = 1.0;
    for (std::size_t i = 0; i < n_rows_; ++i) {
      if (i == r) continue;
      const double f = at(i, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_cols_; ++j) at(i, j) -= f * at(r, j);
      at(i, c) = 0.0;
    }
    for (auto* row : {&obj_, &obj1_}) {
      const double f = (*row)[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_cols_; ++j) (*row)[j] -= f * at(r, j);
      (*row)[c] = 0.0;
    }
    basis_[r] = c;
  }

  std::size_t n_rows_, n_ref_, n_in_, n_out_, n_cols_, art_begin_;
  std::vector<double> tableau_;
  std::vector<std::size_t> basis_;
  std::vector<double> obj_;   // phase-2 reduced costs, last entry = -objective
  std::vector<double> obj1_;  // phase-1 reduced costs
};

// True when a renders b redundant for the frontier: no worse on every input
// and output. Ties between identical units keep the earlier index.
inline bool dominates(const FrontierUnit& a, const FrontierUnit& b) {
  for (std::size_t k = 0; k < a.inputs.size(); ++k)
    if (a.inputs[k] > b.inputs[k]) return false;
  for (std::size_t m = 0; m < a.outputs.size(); ++m)
    if (a.outputs[m] < b.outputs[m]) return false;
  return true;
}

inline bool identical(const FrontierUnit& a, const FrontierUnit& b) {
  return a.inputs == b.inputs && a.outputs == b.outputs;
}

// Indices of units that survive pairwise dominance filtering. Dominated units
// cannot change the CRS hull, so scoring against the survivors is exact; this
// is what keeps repeated scoring cheap inside bootstrap loops.
inline std::vector<std::size_t> nondominated(const std::vector<const FrontierUnit*>& units) {
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < units.size(); ++j) {
    bool dropped = false;
    for (std::size_t i = 0; i < units.size() && !dropped; ++i) {
      if (i == j) continue;
      if (dominates(*units[i], *units[j]) &&
          (!identical(*units[i], *units[j]) || i < j))
        dropped = true;
    }
    if (!dropped) keep.push_back(j);
  }
  return keep;
}

inline EfficiencyScore solve_against(const FrontierUnit& target,
                                     const std::vector<const FrontierUnit*>& reference,
                                     std::size_t n_in, std::size_t n_out) {
  EnvelopmentLp lp(reference, target, n_in, n_out);
  std::vector<double> gamma;
  double theta = lp.solve(gamma);
  if (theta > 1.0 - k_opt_tol) theta = 1.0;  // stable "fully efficient" class
  EfficiencyScore s;
  s.unit_id = target.unit_id;
  s.score = theta;
  for (std::size_t j = 0; j < reference.size(); ++j)
    if (gamma[j] > k_peer_tol) s.binding_peers.push_back(reference[j]->unit_id);
  std::sort(s.binding_peers.begin(), s.binding_peers.end());
  return s;
}

}  // namespace detail

// Score one unit against an explicit reference set. Self-inclusion is the
// caller's choice; an undominated target outside the reference is infeasible.
inline EfficiencyScore solve_envelopment(const FrontierUnit& target,
                                         const FrontierSample& reference) {
  reference.validate();
  if (target.inputs.size() != reference.n_inputs ||
      target.outputs.size() != reference.n_outputs)
    throw validation_error("target dimensions do not match the reference sample");
  std::vector<const FrontierUnit*> ref;
  ref.reserve(reference.units.size());
  for (const auto& u : reference.units) ref.push_back(&u);
  return detail::solve_against(target, ref, reference.n_inputs, reference.n_outputs);
}

// Score every unit of the sample, each against the pooled reference set
// (common scope) or against the units sharing its group label (by_group).
// Results come back in input order.
inline std::vector<EfficiencyScore> score_all(const FrontierSample& sample) {
  sample.validate();
  std::vector<EfficiencyScore> out(sample.units.size());

  auto score_subset = [&](const std::vector<std::size_t>& member_idx) {
    std::vector<const FrontierUnit*> members;
    members.reserve(member_idx.size());
    for (std::size_t i : member_idx) members.push_back(&sample.units[i]);
    const auto keep = detail::nondominated(members);
    std::vector<const FrontierUnit*> ref;
    ref.reserve(keep.size());
    for (std::size_t k : keep) ref.push_back(members[k]);
    for (std::size_t i = 0; i < member_idx.size(); ++i)
      out[member_idx[i]] =
          detail::solve_against(*members[i], ref, sample.n_inputs, sample.n_outputs);
  };

  if (sample.scope == Scope::common) {
    std::vector<std::size_t> all(sample.units.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    score_subset(all);
  } else {
    std::vector<std::string> labels = sample.groups;
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    for (const auto& label : labels) {
      std::vector<std::size_t> member_idx;
      for (std::size_t i = 0; i < sample.units.size(); ++i)
        if (sample.groups[i] == label) member_idx.push_back(i);
      score_subset(member_idx);
    }
  }
  return out;
}

// unit_id,scope,group,score,peers with peers semicolon-joined.
inline void write_scores_csv(std::ostream& out, const std::vector<EfficiencyScore>& scores,
                             const FrontierSample& sample) {
  out << "unit_id,scope,group,score,peers\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::string group =
        sample.scope == Scope::by_group ? sample.groups[i] : std::string();
    out << scores[i].unit_id << ',' << to_string(sample.scope) << ',' << group << ','
        << csv::fmt(scores[i].score, 10) << ',';
    for (std::size_t p = 0; p < scores[i].binding_peers.size(); ++p) {
      if (p) out << ';';
      out << scores[i].binding_peers[p];
    }
    out << '\n';
  }
}

}  // namespace frontier_match::dea
