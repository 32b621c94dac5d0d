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

/**
 * @file decoder.hpp
 * @brief CRF-CTC decoding: exact two-stage decode, greedy decode and the
 * streaming LookAround decoder with its hardware cost model.
 *
 * A frame holds S x D log-scores; decision 0 is Stay and decision 1 + b
 * shifts base b into the state, so for state length 1 the destination of a
 * move is simply b. Decoding runs two stages:
 *
 *   1. transition posteriors u_t(s, d) = alpha_{t-1}(s) + w_t(s, d) + beta_t(dst)
 *      from log-sum-exp forward/backward recursions;
 *   2. max-plus forward/backward over u, picking per timestep the transition
 *      with the highest max-marginal.
 *
 * Ties resolve to the lowest flat index s * D + d everywhere.
 */

#ifndef CIMCALL_DECODER_HPP
#define CIMCALL_DECODER_HPP

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cimcall/dnn.hpp"

namespace cimcall::decoder {

inline constexpr char kBases[] = {'A', 'C', 'G', 'T'};

struct MoveSequence {
    int initial_state = 0;
    int n_states = 4;
    int n_decisions = 5;
    /// Flat transition index s * D + d chosen at each timestep.
    std::vector<int> transitions;

    std::size_t size() const { return transitions.size(); }
    bool is_stay(std::size_t t) const { return transitions[t] % n_decisions == 0; }
    /// Base index 0..3 emitted at t, or -1 for Stay.
    int move_base(std::size_t t) const;
    char initial_base() const { return kBases[initial_state % 4]; }

    /// Builds a state-length-1 sequence from an initial base and per-step
    /// moves ('A'..'T', or nullopt for Stay). Sources follow the moves.
    static MoveSequence from_moves(char initial, const std::vector<std::optional<char>>& moves);
};

/// Stay emits nothing, Move(b) appends b, the initial state emits its base.
std::string collapse_moves(const MoveSequence& moves);

/// Collapse, also reporting the frame index that produced each base (the
/// initial base is attributed to frame 0).
std::string collapse_moves(const MoveSequence& moves, std::vector<int>& base_frames);

struct LAParams {
    int l_tp = 4;
    int l_mlp = 1;

    void validate() const;
    bool operator==(const LAParams&) const = default;
};

struct DecoderCost {
    int registers = 0;
    int latency_cycles = 0;
    int parallel_tp = 0;
    int parallel_mlp = 0;
};

DecoderCost decoder_cost(const LAParams& params);

/// Destination state of decision d from state s for S states.
int destination(int s, int d, int n_states);

MoveSequence full_crf_decode(const dnn::TransitionFrames& frames);
MoveSequence greedy_decode(const dnn::TransitionFrames& frames);

/// Streaming LookAround decoder for one read. Frames are pushed in order;
/// the decision for frame t is released once frame t + L_TP + L_MLP has been
/// pushed, or on flush().
class LookAroundDecoder {
public:
    explicit LookAroundDecoder(LAParams params, int n_states = 4, int n_decisions = 5);

    /// Consume one frame of S * D scores; returns transitions decided by it.
    std::vector<int> push(std::span<const double> frame);
    /// Signal end of stream and drain remaining decisions.
    std::vector<int> flush();

    /// Raw frames plus posterior rows currently held.
    std::size_t buffered() const { return raw_.size() + post_.size(); }
    std::size_t peak_buffered() const { return peak_buffered_; }
    long frames_received() const { return received_; }
    long decisions_emitted() const { return next_decision_; }
    const LAParams& params() const { return params_; }

private:
    void advance(std::vector<int>& out);
    void compute_posterior();
    int decide();

    LAParams params_;
    int S_;
    int D_;
    bool ended_ = false;
    long received_ = 0;
    long next_posterior_ = 0;
    long next_decision_ = 0;
    std::vector<double> alpha_;      // sum-forward before next_posterior_
    std::vector<double> max_alpha_;  // max-forward before next_decision_
    std::deque<std::vector<double>> raw_;   // frames next_posterior_ .. received_ - 1
    std::deque<std::vector<double>> post_;  // posteriors next_decision_ .. next_posterior_ - 1
    std::size_t peak_buffered_ = 0;
};

MoveSequence lookaround_decode(const dnn::TransitionFrames& frames, const LAParams& params);

/// Throws InputError on NaN / Inf scores.
void check_finite(const dnn::TransitionFrames& frames);

}  // namespace cimcall::decoder

#endif  // CIMCALL_DECODER_HPP
