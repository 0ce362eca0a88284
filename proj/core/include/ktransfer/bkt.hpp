#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ktransfer/domain.hpp"

namespace ktransfer {

struct BktParams {
  double p_init = 0.4;
  double p_transit = 0.15;
  double p_guess = 0.2;
  double p_slip = 0.1;

  bool valid() const;
  bool operator==(const BktParams&) const = default;
};

struct BktState {
  double p_mastery = 0.0;
};

inline BktState initial_state(const BktParams& p) { return {p.p_init}; }

// P(correct) = L (1 - S) + (1 - L) G.
double predict_correct(const BktParams& params, const BktState& state);

// Bayes update on the observation followed by the learning transition.
BktState observe(const BktParams& params, BktState state, int correct);

using OutcomeSequence = std::vector<std::uint8_t>;

// Marginal log-likelihood of the sequences under params (forward algorithm).
double log_likelihood(const BktParams& params, const std::vector<OutcomeSequence>& sequences);

// One Baum-Welch iteration; guess and slip are capped at guess_slip_cap.
BktParams em_step(const BktParams& params, const std::vector<OutcomeSequence>& sequences,
                  double guess_slip_cap = 0.3);

struct EmOptions {
  int max_iters = 200;
  double tol = 1e-6;
  double guess_slip_cap = 0.3;
};

struct EmResult {
  BktParams params;
  int iterations = 0;
  std::vector<double> log_likelihood;  // entry 0 is the initial value
  bool degenerate = false;             // every observation had the same outcome
};

// Iterates EM until the log-likelihood gain falls below tol (the sub-tol
// update is discarded) or max_iters is reached.
EmResult fit_em(const std::vector<OutcomeSequence>& sequences, const BktParams& init, const EmOptions& opts = {});

// Per-(student, KC) outcome sub-sequences, grouped by KC in KC order.
std::map<std::string, std::vector<OutcomeSequence>> kc_sequences(const Dataset& dataset);

// A single parameter set fitted on every (student, KC) sequence of every source course.
EmResult fit_agnostic_bkt(const std::vector<const Dataset*>& sources, const BktParams& init = {},
                          const EmOptions& opts = {});

// Per-KC parameters; KCs missing from `per_kc` fall back to `shared`.
struct BktModel {
  BktParams shared;
  std::map<std::string, BktParams> per_kc;

  const BktParams& params_for(const std::string& kc) const;
};

BktModel fit_course_bkt(const Dataset& dataset, const BktParams& init = {}, const EmOptions& opts = {});

// One (prediction, label) per question interaction in dataset order. Each
// (student, KC) keeps its own chain; multi-KC questions predict the mean.
std::vector<std::pair<double, int>> predict_dataset_bkt(const BktModel& model, const Dataset& dataset);
std::vector<std::pair<double, int>> predict_dataset_bkt(const BktParams& params, const Dataset& dataset);

// `kc_id,p_init,p_transit,p_guess,p_slip`; kc_id "*" carries the shared set.
void write_bkt_params(std::ostream& out, const BktModel& model);
BktModel read_bkt_params(std::istream& in);

}  // namespace ktransfer
