/*
 * Copyright 2026 The cimcall Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cimcall/decoder.hpp"

#include <cmath>

#include "crf_ops.hpp"

namespace cimcall::decoder {

using detail::Semiring;

int destination(int s, int d, int n_states) {
    if (d == 0) return s;
    return (s * 4 + (d - 1)) % n_states;
}

int MoveSequence::move_base(std::size_t t) const {
    const int d = transitions[t] % n_decisions;
    return d == 0 ? -1 : d - 1;
}

MoveSequence MoveSequence::from_moves(char initial, const std::vector<std::optional<char>>& moves) {
    auto index_of = [](char b) {
        for (int i = 0; i < 4; ++i) {
            if (kBases[i] == b) return i;
        }
        throw InputError(std::string("invalid base '") + b + "'");
    };
    MoveSequence m;
    m.initial_state = index_of(initial);
    int state = m.initial_state;
    for (const auto& mv : moves) {
        const int d = mv ? 1 + index_of(*mv) : 0;
        m.transitions.push_back(state * m.n_decisions + d);
        state = destination(state, d, m.n_states);
    }
    return m;
}

std::string collapse_moves(const MoveSequence& moves, std::vector<int>& base_frames) {
    std::string out(1, moves.initial_base());
    base_frames.assign(1, 0);
    for (std::size_t t = 0; t < moves.size(); ++t) {
        const int b = moves.move_base(t);
        if (b < 0) continue;
        out.push_back(kBases[b]);
        base_frames.push_back(static_cast<int>(t));
    }
    return out;
}

std::string collapse_moves(const MoveSequence& moves) {
    std::vector<int> frames;
    return collapse_moves(moves, frames);
}

void LAParams::validate() const {
    if (l_tp < 1) throw ConfigError("decoder.l_tp must be >= 1");
    if (l_mlp < 1) throw ConfigError("decoder.l_mlp must be >= 1");
}

DecoderCost decoder_cost(const LAParams& params) {
    params.validate();
    DecoderCost c;
    c.registers = 2 * params.l_tp + 2 * params.l_mlp;
    c.latency_cycles = c.registers + 1;
    c.parallel_tp = params.l_tp;
    c.parallel_mlp = params.l_mlp;
    return c;
}

void check_finite(const dnn::TransitionFrames& frames) {
    for (double v : frames.scores) {
        if (!std::isfinite(v)) throw InputError("transition scores contain NaN or Inf");
    }
}

namespace {

MoveSequence from_transitions(std::vector<int> transitions, int S, int D) {
    MoveSequence m;
    m.n_states = S;
    m.n_decisions = D;
    m.initial_state = transitions.empty() ? 0 : transitions.front() / D;
    m.transitions = std::move(transitions);
    return m;
}

void check_frames(const dnn::TransitionFrames& frames) {
    if (frames.T < 1) throw InputError("decode: need at least one frame");
    check_finite(frames);
}

}  // namespace

MoveSequence full_crf_decode(const dnn::TransitionFrames& frames) {
    check_frames(frames);
    const int T = frames.T;
    const int S = frames.n_states;
    const int D = frames.n_decisions;
    const std::size_t SD = static_cast<std::size_t>(S) * D;
    using Rows = std::vector<std::vector<double>>;

    // Stage 1: posteriors.
    Rows alpha(T + 1, std::vector<double>(S, 0.0));  // alpha[t]: before frame t
    for (int t = 0; t < T; ++t) detail::forward_step(Semiring::Sum, alpha[t], frames.frame(t), S, D, alpha[t + 1]);
    Rows beta(T, std::vector<double>(S, 0.0));  // beta[t]: after frame t
    for (int t = T - 1; t > 0; --t) detail::backward_step(Semiring::Sum, beta[t], frames.frame(t), S, D, beta[t - 1]);
    Rows post(T, std::vector<double>(SD));
    for (int t = 0; t < T; ++t) detail::combine(alpha[t], frames.frame(t), beta[t], S, D, post[t]);

    // Stage 2: max-marginals over the posteriors.
    Rows fwd(T + 1, std::vector<double>(S, 0.0));
    for (int t = 0; t < T; ++t) detail::forward_step(Semiring::Max, fwd[t], post[t], S, D, fwd[t + 1]);
    Rows bwd(T, std::vector<double>(S, 0.0));
    for (int t = T - 1; t > 0; --t) detail::backward_step(Semiring::Max, bwd[t], post[t], S, D, bwd[t - 1]);

    std::vector<int> transitions(static_cast<std::size_t>(T));
    std::vector<double> marginal(SD);
    for (int t = 0; t < T; ++t) {
        detail::combine(fwd[t], post[t], bwd[t], S, D, marginal);
        transitions[t] = detail::argmax(marginal);
    }
    return from_transitions(std::move(transitions), S, D);
}

MoveSequence greedy_decode(const dnn::TransitionFrames& frames) {
    check_frames(frames);
    const int S = frames.n_states;
    const int D = frames.n_decisions;
    std::vector<int> transitions;
    transitions.reserve(static_cast<std::size_t>(frames.T));
    transitions.push_back(detail::argmax(frames.frame(0)));
    for (int t = 1; t < frames.T; ++t) {
        const int prev = transitions.back();
        const int src = destination(prev / D, prev % D, S);
        const int d = detail::argmax(frames.frame(t).subspan(static_cast<std::size_t>(src) * D, D));
        transitions.push_back(src * D + d);
    }
    return from_transitions(std::move(transitions), S, D);
}

LookAroundDecoder::LookAroundDecoder(LAParams params, int n_states, int n_decisions)
    : params_(params),
      S_(n_states),
      D_(n_decisions),
      alpha_(static_cast<std::size_t>(n_states), 0.0),
      max_alpha_(static_cast<std::size_t>(n_states), 0.0) {
    params_.validate();
}

std::vector<int> LookAroundDecoder::push(std::span<const double> frame) {
    if (ended_) throw Error("LookAroundDecoder: push after flush");
    if (frame.size() != static_cast<std::size_t>(S_) * D_) throw InputError("LookAroundDecoder: frame size mismatch");
    for (double v : frame) {
        if (!std::isfinite(v)) throw InputError("transition scores contain NaN or Inf");
    }
    raw_.emplace_back(frame.begin(), frame.end());
    ++received_;
    std::vector<int> out;
    advance(out);
    return out;
}

std::vector<int> LookAroundDecoder::flush() {
    ended_ = true;
    std::vector<int> out;
    advance(out);
    return out;
}

void LookAroundDecoder::advance(std::vector<int>& out) {
    peak_buffered_ = std::max(peak_buffered_, buffered());
    for (;;) {
        bool progressed = false;
        // Posterior for frame p needs frames up to p + L_TP.
        if (next_posterior_ < received_ && (ended_ || received_ - 1 >= next_posterior_ + params_.l_tp)) {
            compute_posterior();
            progressed = true;
        }
        // Decision for t needs posteriors up to t + L_MLP.
        if (next_decision_ < next_posterior_ &&
            (ended_ ? next_posterior_ == received_ || next_posterior_ - 1 >= next_decision_ + params_.l_mlp
                    : next_posterior_ - 1 >= next_decision_ + params_.l_mlp)) {
            out.push_back(decide());
            progressed = true;
        }
        peak_buffered_ = std::max(peak_buffered_, buffered());
        if (!progressed) break;
    }
}

void LookAroundDecoder::compute_posterior() {
    // raw_[0] is frame next_posterior_; look ahead at most L_TP frames.
    const long last = std::min<long>(received_ - 1, next_posterior_ + params_.l_tp);
    const auto window = static_cast<std::size_t>(last - next_posterior_);
    std::vector<double> beta(static_cast<std::size_t>(S_), 0.0), tmp(static_cast<std::size_t>(S_));
    for (std::size_t k = window; k >= 1; --k) {
        detail::backward_step(Semiring::Sum, beta, raw_[k], S_, D_, tmp);
        beta.swap(tmp);
    }
    std::vector<double> u(static_cast<std::size_t>(S_) * D_);
    detail::combine(alpha_, raw_.front(), beta, S_, D_, u);
    detail::forward_step(Semiring::Sum, std::vector<double>(alpha_), raw_.front(), S_, D_, alpha_);
    post_.push_back(std::move(u));
    raw_.pop_front();
    ++next_posterior_;
}

int LookAroundDecoder::decide() {
    const long last = std::min<long>(next_posterior_ - 1, next_decision_ + params_.l_mlp);
    const auto window = static_cast<std::size_t>(last - next_decision_);
    std::vector<double> tail(static_cast<std::size_t>(S_), 0.0), tmp(static_cast<std::size_t>(S_));
    for (std::size_t k = window; k >= 1; --k) {
        detail::backward_step(Semiring::Max, tail, post_[k], S_, D_, tmp);
        tail.swap(tmp);
    }
    std::vector<double> marginal(static_cast<std::size_t>(S_) * D_);
    detail::combine(max_alpha_, post_.front(), tail, S_, D_, marginal);
    const int choice = detail::argmax(marginal);
    detail::forward_step(Semiring::Max, std::vector<double>(max_alpha_), post_.front(), S_, D_, max_alpha_);
    post_.pop_front();
    ++next_decision_;
    return choice;
}

MoveSequence lookaround_decode(const dnn::TransitionFrames& frames, const LAParams& params) {
    check_frames(frames);
    LookAroundDecoder dec(params, frames.n_states, frames.n_decisions);
    std::vector<int> transitions;
    transitions.reserve(static_cast<std::size_t>(frames.T));
    for (int t = 0; t < frames.T; ++t) {
        for (int d : dec.push(frames.frame(t))) transitions.push_back(d);
    }
    for (int d : dec.flush()) transitions.push_back(d);
    return from_transitions(std::move(transitions), frames.n_states, frames.n_decisions);
}

}  // namespace cimcall::decoder
