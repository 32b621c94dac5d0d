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

// Basecalling data path around the network: synthetic squiggles, channel
// buffering, chunk/stitch, alignment accuracy and data-volume accounting.

#ifndef CIMCALL_PIPELINE_HPP
#define CIMCALL_PIPELINE_HPP

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cimcall/common.hpp"

namespace cimcall::pipeline {

// ---------------------------------------------------------------------------
// Synthetic signal

struct PoreModel {
    int k = 6;
    /// Mean current level per k-mer, indexed by the base-4 k-mer code
    /// (A=0, C=1, G=2, T=3, first base most significant).
    std::vector<float> levels;
    double level_noise = 0.1;
    double mean_dwell = 10.0;  ///< mean samples per base
    int min_dwell = 1;

    /// Table of 4^k levels drawn from N(0, 1), fixed by the seed.
    static PoreModel random(int k, std::uint64_t seed, double level_noise = 0.1, double mean_dwell = 10.0);
    /// 4^k levels evenly spaced over [-half_range, half_range] and dealt to
    /// k-mers in a seeded random order, so every level is distinct.
    static PoreModel spaced(int k, std::uint64_t seed, double half_range = 2.0);
    static PoreModel load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    void validate() const;
    /// Level of the k-mer centred on position i of seq; positions outside
    /// the sequence read as 'A'.
    float level_at(std::string_view seq, std::size_t i) const;
};

struct SquiggleRead {
    std::uint32_t channel = 0;
    std::string id;
    std::vector<float> samples;
    /// Ground truth, empty for loaded reads.
    std::string sequence;
    /// First sample of each ground-truth base.
    std::vector<std::size_t> base_starts;
};

/// Index 0..3 of an upper-case base; throws InputError otherwise.
int base_index(char b);

std::string random_sequence(std::size_t length, Rng& rng);

/// Per base: dwell = min_dwell + Geometric(p) with the mean matching
/// mean_dwell, samples = k-mer level + N(0, level_noise).
SquiggleRead synth_squiggle(std::string_view sequence, const PoreModel& model, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Chunking

struct ChunkPlan {
    int chunk_size = 4000;
    int overlap = 500;

    void validate() const;
    int stride() const { return chunk_size - overlap; }
    /// Fraction of samples of an infinitely long read that are processed
    /// twice: 2 * overlap / chunk_size.
    double duplicated_fraction() const;
    /// Chunk start offsets for a read of the given length.
    std::vector<std::size_t> starts(std::size_t read_length) const;

    bool operator==(const ChunkPlan&) const = default;
};

struct Chunk {
    std::size_t start = 0;
    std::size_t valid = 0;  ///< real samples before zero padding
    bool padded = false;
    std::vector<float> samples;  ///< always chunk_size long
};

std::vector<Chunk> chunk(std::span<const float> samples, const ChunkPlan& plan);

/// Bases called on one chunk and the chunk-local frame of each base.
struct ChunkCall {
    std::string bases;
    std::vector<int> base_frames;
    int valid_frames = 0;  ///< frames backed by real samples
};

/// Keeps, for every chunk, the bases whose frame lies outside half the
/// overlap at each interior boundary, and concatenates in order.
std::string stitch(const std::vector<ChunkCall>& calls, const ChunkPlan& plan, int samples_per_frame);

// ---------------------------------------------------------------------------
// Signal buffer

struct SignalBufferConfig {
    int channels = 512;
    std::size_t channel_bytes = 2508;  ///< 2.45 kB per channel
    int sample_bytes = 2;              ///< raw ADC sample width
    double sram_bit_energy_j = 2.5e-15;

    std::size_t channel_capacity_samples() const { return channel_bytes / static_cast<std::size_t>(sample_bytes); }
    std::size_t total_bytes() const { return channel_bytes * static_cast<std::size_t>(channels); }
};

/// Per-channel FIFO of raw samples in on-chip SRAM.
class SignalBuffer {
public:
    explicit SignalBuffer(SignalBufferConfig config = {});

    /// Appends samples; throws InputError when the channel would overflow
    /// (nothing is appended in that case).
    void ingest(int channel, std::span<const float> samples);
    /// Removes and returns up to n samples in arrival order.
    std::vector<float> drain(int channel, std::size_t n);

    std::size_t occupancy_samples(int channel) const;
    std::size_t occupancy_bytes(int channel) const;
    std::size_t total_occupancy_bytes() const;
    const SignalBufferConfig& config() const { return config_; }

    std::uint64_t bits_written() const { return bits_written_; }
    std::uint64_t bits_read() const { return bits_read_; }
    /// SRAM energy of all accesses so far.
    double energy_j() const;

private:
    void check_channel(int channel) const;

    SignalBufferConfig config_;
    std::vector<std::deque<float>> queues_;
    std::size_t total_samples_ = 0;
    std::uint64_t bits_written_ = 0;
    std::uint64_t bits_read_ = 0;
};

// ---------------------------------------------------------------------------
// Accuracy

struct AlignmentScoring {
    int match = 1;
    int mismatch = -1;
    int gap = -1;
};

struct AlignmentResult {
    long score = 0;
    long matches = 0;
    long length = 0;
    double identity() const { return length == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(length); }
};

/// Global alignment. Among optimal-score alignments the one with the most
/// matches, then the shortest, is reported, which keeps the result
/// symmetric in its two arguments.
AlignmentResult align(std::string_view call, std::string_view reference, const AlignmentScoring& scoring = {});

/// matches / alignment length; throws InputError on an empty argument.
double aligned_accuracy(std::string_view call, std::string_view reference, const AlignmentScoring& scoring = {});

// ---------------------------------------------------------------------------
// Data reduction

struct ReadVolume {
    std::size_t samples = 0;
    std::size_t bases = 0;
};

/// Bytes per raw sample in a storage container, for storage ratios.
struct StorageFormat {
    std::string name;
    double bytes_per_sample = 0;
};

struct DataReductionReport {
    std::size_t reads = 0;
    double raw_bytes = 0;
    double called_bytes = 0;
    double communication_ratio = 0;  ///< 0 when there are no reads
    std::map<std::string, double> storage_ratios;
};

DataReductionReport data_reduction_report(std::span<const ReadVolume> reads, double raw_bytes_per_sample,
                                          double bytes_per_base,
                                          std::span<const StorageFormat> formats = {},
                                          double called_storage_bytes_per_base = 0);

/// Per-dataset volume table with a totals row, in GB.
struct VolumeTable {
    struct Row {
        std::string dataset;
        long reads = 0;
        double raw_gb = 0;
        double string_gb = 0;
        std::map<std::string, double> storage_gb;
    };
    std::vector<Row> rows;
    Row total;

    static VolumeTable load(const std::filesystem::path& path);
    double communication_ratio() const { return total.raw_gb / total.string_gb; }
    double storage_ratio(const std::string& numerator, const std::string& denominator) const;
};

// ---------------------------------------------------------------------------
// Files

/// Raw signal file: "CMRW" magic, u32 version (1), u32 record count, then
/// per record u32 channel, u32 sample count and that many f32 samples.
/// All integers and floats little-endian.
void write_raw(const std::filesystem::path& path, const std::vector<SquiggleRead>& reads);
std::vector<SquiggleRead> read_raw(const std::filesystem::path& path);

struct FastaRecord {
    std::string name;
    std::string sequence;
};

void write_fasta(const std::filesystem::path& path, const std::vector<FastaRecord>& records);
std::vector<FastaRecord> read_fasta(const std::filesystem::path& path);
std::string to_fasta(const std::vector<FastaRecord>& records);

}  // namespace cimcall::pipeline

#endif  // CIMCALL_PIPELINE_HPP
