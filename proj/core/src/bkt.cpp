#include "ktransfer/bkt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "ktransfer/errors.hpp"
#include "ktransfer/ingest.hpp"

namespace ktransfer {

bool BktParams::valid() const {
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  return in01(p_init) && in01(p_transit) && in01(p_guess) && in01(p_slip);
}

double predict_correct(const BktParams& p, const BktState& s) {
  return s.p_mastery * (1.0 - p.p_slip) + (1.0 - s.p_mastery) * p.p_guess;
}

BktState observe(const BktParams& p, BktState s, int correct) {
  const double L = s.p_mastery;
  const double like_m = correct ? 1.0 - p.p_slip : p.p_slip;
  const double like_u = correct ? p.p_guess : 1.0 - p.p_guess;
  const double den = L * like_m + (1.0 - L) * like_u;
  const double post = den > 0.0 ? L * like_m / den : L;
  s.p_mastery = std::clamp(post + (1.0 - post) * p.p_transit, 0.0, 1.0);
  return s;
}

namespace {

struct Stats {
  double ll = 0.0;
  double init_m = 0.0;
  double n_seq = 0.0;
  double trans_um = 0.0;   // expected U -> M transitions
  double from_u = 0.0;     // expected time in U with a successor
  double u_total = 0.0, u_correct = 0.0;
  double m_total = 0.0, m_wrong = 0.0;
};

double emit(const BktParams& p, int state, int o) {
  if (state == 1) return o ? 1.0 - p.p_slip : p.p_slip;
  return o ? p.p_guess : 1.0 - p.p_guess;
}

// Scaled forward-backward over one sequence, accumulating expected counts.
void accumulate(const BktParams& p, const OutcomeSequence& seq, Stats& st, std::vector<std::array<double, 2>>& alpha,
                std::vector<std::array<double, 2>>& beta, std::vector<double>& scale) {
  const std::size_t T = seq.size();
  if (T == 0) return;
  alpha.resize(T);
  beta.resize(T);
  scale.resize(T);
  const double A[2][2] = {{1.0 - p.p_transit, p.p_transit}, {0.0, 1.0}};

  alpha[0] = {(1.0 - p.p_init) * emit(p, 0, seq[0]), p.p_init * emit(p, 1, seq[0])};
  for (std::size_t t = 0;; ++t) {
    double c = alpha[t][0] + alpha[t][1];
    if (!(c > 0.0)) c = 1e-300;
    scale[t] = c;
    alpha[t][0] /= c;
    alpha[t][1] /= c;
    st.ll += std::log(c);
    if (t + 1 == T) break;
    for (int j = 0; j < 2; ++j)
      alpha[t + 1][j] = (alpha[t][0] * A[0][j] + alpha[t][1] * A[1][j]) * emit(p, j, seq[t + 1]);
  }
  beta[T - 1] = {1.0, 1.0};
  for (std::size_t t = T - 1; t-- > 0;) {
    for (int i = 0; i < 2; ++i) {
      double s = 0.0;
      for (int j = 0; j < 2; ++j) s += A[i][j] * emit(p, j, seq[t + 1]) * beta[t + 1][j];
      beta[t][i] = s / scale[t + 1];
    }
  }
  st.n_seq += 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double gu = alpha[t][0] * beta[t][0], gm = alpha[t][1] * beta[t][1];
    const double norm = gu + gm > 0.0 ? gu + gm : 1.0;
    const double pu = gu / norm, pm = gm / norm;
    if (t == 0) st.init_m += pm;
    st.u_total += pu;
    st.m_total += pm;
    if (seq[t]) st.u_correct += pu;
    else st.m_wrong += pm;
    if (t + 1 < T) {
      const double xi_um = alpha[t][0] * A[0][1] * emit(p, 1, seq[t + 1]) * beta[t + 1][1] / scale[t + 1];
      st.trans_um += xi_um;
      st.from_u += pu;
    }
  }
}

Stats expectations(const BktParams& p, const std::vector<OutcomeSequence>& seqs) {
  Stats st;
  std::vector<std::array<double, 2>> alpha, beta;
  std::vector<double> scale;
  for (const auto& s : seqs) accumulate(p, s, st, alpha, beta, scale);
  return st;
}

BktParams maximize(const BktParams& prev, const Stats& st, double cap) {
  BktParams p = prev;
  if (st.n_seq > 0) p.p_init = std::clamp(st.init_m / st.n_seq, 0.0, 1.0);
  if (st.from_u > 0) p.p_transit = std::clamp(st.trans_um / st.from_u, 0.0, 1.0);
  if (st.u_total > 0) p.p_guess = std::clamp(st.u_correct / st.u_total, 0.0, cap);
  if (st.m_total > 0) p.p_slip = std::clamp(st.m_wrong / st.m_total, 0.0, cap);
  return p;
}

}  // namespace

double log_likelihood(const BktParams& params, const std::vector<OutcomeSequence>& sequences) {
  double ll = 0.0;
  for (const auto& seq : sequences) {
    BktState s = initial_state(params);
    for (auto o : seq) {
      const double pc = predict_correct(params, s);
      ll += std::log(std::max(o ? pc : 1.0 - pc, 1e-300));
      s = observe(params, s, o);
    }
  }
  return ll;
}

BktParams em_step(const BktParams& params, const std::vector<OutcomeSequence>& sequences, double cap) {
  return maximize(params, expectations(params, sequences), cap);
}

EmResult fit_em(const std::vector<OutcomeSequence>& sequences, const BktParams& init, const EmOptions& opts) {
  for (const auto& s : sequences)
    if (s.empty()) throw ConfigError("BKT sequences must be non-empty");
  EmResult res;
  res.params = init;
  std::size_t ones = 0, total = 0;
  for (const auto& s : sequences) {
    total += s.size();
    ones += static_cast<std::size_t>(std::count(s.begin(), s.end(), std::uint8_t{1}));
  }
  res.degenerate = total > 0 && (ones == 0 || ones == total);

  Stats st = expectations(res.params, sequences);
  res.log_likelihood.push_back(st.ll);
  for (int it = 0; it < opts.max_iters; ++it) {
    const BktParams next = maximize(res.params, st, opts.guess_slip_cap);
    Stats next_st = expectations(next, sequences);
    const double gain = next_st.ll - st.ll;
    if (!(gain >= opts.tol)) break;
    res.params = next;
    st = std::move(next_st);
    res.log_likelihood.push_back(st.ll);
    ++res.iterations;
  }
  if (res.degenerate) {
    res.params.p_guess = std::clamp(res.params.p_guess, 0.0, opts.guess_slip_cap);
    res.params.p_slip = std::clamp(res.params.p_slip, 0.0, opts.guess_slip_cap);
  }
  return res;
}

std::map<std::string, std::vector<OutcomeSequence>> kc_sequences(const Dataset& dataset) {
  std::map<std::string, std::vector<OutcomeSequence>> out;
  for (const auto& h : dataset.histories()) {
    std::map<std::string, OutcomeSequence> per;
    for (const auto& x : h.interactions)
      if (x.is_question())
        for (const auto& k : x.kc_ids) per[k].push_back(x.correct.value_or(0));
    for (auto& [k, seq] : per) out[k].push_back(std::move(seq));
  }
  return out;
}

EmResult fit_agnostic_bkt(const std::vector<const Dataset*>& sources, const BktParams& init, const EmOptions& opts) {
  std::vector<OutcomeSequence> pooled;
  for (const auto* ds : sources)
    for (auto& [_, seqs] : kc_sequences(*ds))
      for (auto& s : seqs) pooled.push_back(std::move(s));
  if (pooled.empty()) throw ConfigError("A-BKT needs at least one question interaction");
  return fit_em(pooled, init, opts);
}

const BktParams& BktModel::params_for(const std::string& kc) const {
  auto it = per_kc.find(kc);
  return it == per_kc.end() ? shared : it->second;
}

BktModel fit_course_bkt(const Dataset& dataset, const BktParams& init, const EmOptions& opts) {
  BktModel model;
  auto by_kc = kc_sequences(dataset);
  std::vector<OutcomeSequence> pooled;
  for (const auto& [kc, seqs] : by_kc) {
    model.per_kc[kc] = fit_em(seqs, init, opts).params;
    pooled.insert(pooled.end(), seqs.begin(), seqs.end());
  }
  model.shared = pooled.empty() ? init : fit_em(pooled, init, opts).params;
  return model;
}

std::vector<std::pair<double, int>> predict_dataset_bkt(const BktModel& model, const Dataset& dataset) {
  std::vector<std::pair<double, int>> out;
  out.reserve(dataset.question_interaction_count());
  for (const auto& h : dataset.histories()) {
    std::unordered_map<std::string, BktState> chains;
    for (const auto& x : h.interactions) {
      if (!x.is_question() || x.kc_ids.empty()) continue;
      double sum = 0.0;
      for (const auto& k : x.kc_ids) {
        const auto& p = model.params_for(k);
        auto [it, _] = chains.try_emplace(k, initial_state(p));
        sum += predict_correct(p, it->second);
      }
      const int y = x.correct.value_or(0);
      out.emplace_back(sum / static_cast<double>(x.kc_ids.size()), y);
      for (const auto& k : x.kc_ids) chains[k] = observe(model.params_for(k), chains[k], y);
    }
  }
  return out;
}

std::vector<std::pair<double, int>> predict_dataset_bkt(const BktParams& params, const Dataset& dataset) {
  return predict_dataset_bkt(BktModel{params, {}}, dataset);
}

void write_bkt_params(std::ostream& out, const BktModel& model) {
  out << "kc_id,p_init,p_transit,p_guess,p_slip\n";
  auto row = [&](const std::string& k, const BktParams& p) {
    out << k << ',' << std::setprecision(17) << p.p_init << ',' << p.p_transit << ',' << p.p_guess << ','
        << p.p_slip << '\n';
  };
  row("*", model.shared);
  for (const auto& [k, p] : model.per_kc) row(k, p);
}

BktModel read_bkt_params(std::istream& in) {
  BktModel model;
  std::string line;
  std::size_t lineno = 0;
  bool shared_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 || line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 5) throw ParseError(lineno, "", "expected 5 fields");
    BktParams p;
    try {
      p = {std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
    } catch (const std::exception&) {
      throw ParseError(lineno, "", "non-numeric BKT parameter");
    }
    if (!p.valid()) throw ParseError(lineno, "", "BKT parameter outside [0, 1]");
    if (f[0] == "*") {
      model.shared = p;
      shared_seen = true;
    } else {
      model.per_kc[f[0]] = p;
    }
  }
  if (!shared_seen) throw ParseError(lineno, "kc_id", "missing shared '*' row");
  return model;
}

}  // namespace ktransfer
