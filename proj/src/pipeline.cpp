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

#include "cimcall/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"

namespace cimcall::pipeline {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic signal

int base_index(char b) {
    switch (b) {
        case 'A': return 0;
        case 'C': return 1;
        case 'G': return 2;
        case 'T': return 3;
        default: throw InputError(std::string("invalid base '") + b + "'");
    }
}

PoreModel PoreModel::random(int k, std::uint64_t seed, double level_noise, double mean_dwell) {
    PoreModel m;
    m.k = k;
    m.level_noise = level_noise;
    m.mean_dwell = mean_dwell;
    if (k < 1 || k > 10) throw ConfigError("pore model k must be in [1, 10]");
    Rng rng(derive_seed(seed, 0x706f7265));
    std::normal_distribution<float> n(0.0f, 1.0f);
    m.levels.resize(std::size_t{1} << (2 * k));
    for (auto& l : m.levels) l = n(rng);
    return m;
}

PoreModel PoreModel::spaced(int k, std::uint64_t seed, double half_range) {
    if (k < 1 || k > 10) throw ConfigError("pore model k must be in [1, 10]");
    if (!(half_range > 0.0)) throw ConfigError("pore model level range must be > 0");
    PoreModel m;
    m.k = k;
    const std::size_t n = std::size_t{1} << (2 * k);
    m.levels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
        m.levels[i] = static_cast<float>(-half_range + 2.0 * half_range * t);
    }
    Rng rng(derive_seed(seed, 0x73706163));
    std::shuffle(m.levels.begin(), m.levels.end(), rng);
    return m;
}

void PoreModel::validate() const {
    if (k < 1 || k > 10) throw ConfigError("pore model k must be in [1, 10]");
    if (levels.size() != (std::size_t{1} << (2 * k))) throw ConfigError("pore model table does not cover 4^k k-mers");
    if (!(mean_dwell > 0.0)) throw ConfigError("pore model mean_dwell must be > 0");
    if (min_dwell < 1 || mean_dwell < min_dwell) throw ConfigError("pore model needs 1 <= min_dwell <= mean_dwell");
    if (!(level_noise >= 0.0)) throw ConfigError("pore model level_noise must be >= 0");
}

float PoreModel::level_at(std::string_view seq, std::size_t i) const {
    std::size_t code = 0;
    const long first = static_cast<long>(i) - k / 2;
    for (long p = first; p < first + k; ++p) {
        const int b = (p < 0 || p >= static_cast<long>(seq.size())) ? 0 : base_index(seq[static_cast<std::size_t>(p)]);
        code = code * 4 + static_cast<std::size_t>(b);
    }
    return levels[code];
}

PoreModel PoreModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read pore model " + path.string());
    json j;
    try {
        in >> j;
        PoreModel m;
        m.k = j.at("k");
        m.levels = j.at("levels").get<std::vector<float>>();
        m.level_noise = j.value("level_noise", m.level_noise);
        m.mean_dwell = j.value("mean_dwell", m.mean_dwell);
        m.min_dwell = j.value("min_dwell", m.min_dwell);
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void PoreModel::save(const std::filesystem::path& path) const {
    json j = {{"k", k}, {"levels", levels}, {"level_noise", level_noise}, {"mean_dwell", mean_dwell},
              {"min_dwell", min_dwell}};
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump() << '\n';
}

std::string random_sequence(std::size_t length, Rng& rng) {
    static constexpr char kAlphabet[] = {'A', 'C', 'G', 'T'};
    std::uniform_int_distribution<int> pick(0, 3);
    std::string s(length, 'A');
    for (auto& c : s) c = kAlphabet[pick(rng)];
    return s;
}

SquiggleRead synth_squiggle(std::string_view sequence, const PoreModel& model, std::uint64_t seed) {
    model.validate();
    if (sequence.empty()) throw InputError("synth: empty sequence");
    for (char c : sequence) base_index(c);

    Rng rng(seed);
    // Extra dwell beyond the minimum is geometric with mean (mean - min).
    const double extra = model.mean_dwell - model.min_dwell;
    std::geometric_distribution<int> dwell(1.0 / (extra + 1.0));
    std::normal_distribution<float> noise(0.0f, static_cast<float>(model.level_noise));

    SquiggleRead read;
    read.sequence = std::string(sequence);
    read.samples.reserve(static_cast<std::size_t>(sequence.size() * model.mean_dwell * 1.1));
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        read.base_starts.push_back(read.samples.size());
        const float level = model.level_at(sequence, i);
        const int n = model.min_dwell + (extra > 0.0 ? dwell(rng) : 0);
        for (int s = 0; s < n; ++s) read.samples.push_back(model.level_noise > 0.0 ? level + noise(rng) : level);
    }
    return read;
}

// ---------------------------------------------------------------------------
// Chunking

void ChunkPlan::validate() const {
    if (chunk_size < 1) throw ConfigError("pipeline.chunk_size must be >= 1");
    if (overlap < 0 || overlap >= chunk_size) throw ConfigError("pipeline.overlap must be in [0, chunk_size)");
}

double ChunkPlan::duplicated_fraction() const {
    validate();
    return 2.0 * overlap / static_cast<double>(chunk_size);
}

std::vector<std::size_t> ChunkPlan::starts(std::size_t read_length) const {
    validate();
    std::vector<std::size_t> out{0};
    while (out.back() + static_cast<std::size_t>(chunk_size) < read_length) {
        out.push_back(out.back() + static_cast<std::size_t>(stride()));
    }
    return out;
}

std::vector<Chunk> chunk(std::span<const float> samples, const ChunkPlan& plan) {
    if (samples.empty()) throw InputError("chunk: empty read");
    std::vector<Chunk> out;
    for (std::size_t s : plan.starts(samples.size())) {
        Chunk c;
        c.start = s;
        c.valid = std::min<std::size_t>(plan.chunk_size, samples.size() - s);
        c.padded = c.valid < static_cast<std::size_t>(plan.chunk_size);
        c.samples.assign(static_cast<std::size_t>(plan.chunk_size), 0.0f);
        std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(s), c.valid, c.samples.begin());
        out.push_back(std::move(c));
    }
    return out;
}

std::string stitch(const std::vector<ChunkCall>& calls, const ChunkPlan& plan, int samples_per_frame) {
    if (calls.empty()) throw InputError("stitch: no chunk calls");
    plan.validate();
    if (samples_per_frame < 1) throw ConfigError("stitch: samples_per_frame must be >= 1");
    const int trim = plan.overlap / 2 / samples_per_frame;
    const int chunk_frames = plan.chunk_size / samples_per_frame;
    std::string out;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        const auto& c = calls[i];
        if (c.base_frames.size() != c.bases.size()) throw InputError("stitch: base/frame count mismatch");
        const int lo = i == 0 ? 0 : trim;
        const int hi = i + 1 == calls.size() ? std::numeric_limits<int>::max() : chunk_frames - trim;
        for (std::size_t b = 0; b < c.bases.size(); ++b) {
            if (c.base_frames[b] >= lo && c.base_frames[b] < hi) out.push_back(c.bases[b]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Signal buffer

SignalBuffer::SignalBuffer(SignalBufferConfig config) : config_(config) {
    if (config_.channels < 1 || config_.sample_bytes < 1) throw ConfigError("signal buffer: bad geometry");
    queues_.resize(static_cast<std::size_t>(config_.channels));
}

void SignalBuffer::check_channel(int channel) const {
    if (channel < 0 || channel >= config_.channels) {
        throw InputError("signal buffer: channel " + std::to_string(channel) + " out of range");
    }
}

void SignalBuffer::ingest(int channel, std::span<const float> samples) {
    check_channel(channel);
    auto& q = queues_[static_cast<std::size_t>(channel)];
    if (q.size() + samples.size() > config_.channel_capacity_samples()) {
        throw InputError("signal buffer: channel " + std::to_string(channel) + " overflow (" +
                         std::to_string((q.size() + samples.size()) * config_.sample_bytes) + " > " +
                         std::to_string(config_.channel_bytes) + " bytes)");
    }
    q.insert(q.end(), samples.begin(), samples.end());
    total_samples_ += samples.size();
    bits_written_ += samples.size() * static_cast<std::uint64_t>(config_.sample_bytes) * 8;
}

std::vector<float> SignalBuffer::drain(int channel, std::size_t n) {
    check_channel(channel);
    auto& q = queues_[static_cast<std::size_t>(channel)];
    n = std::min(n, q.size());
    std::vector<float> out(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(n));
    q.erase(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(n));
    total_samples_ -= n;
    bits_read_ += n * static_cast<std::uint64_t>(config_.sample_bytes) * 8;
    return out;
}

std::size_t SignalBuffer::occupancy_samples(int channel) const {
    check_channel(channel);
    return queues_[static_cast<std::size_t>(channel)].size();
}

std::size_t SignalBuffer::occupancy_bytes(int channel) const {
    return occupancy_samples(channel) * static_cast<std::size_t>(config_.sample_bytes);
}

std::size_t SignalBuffer::total_occupancy_bytes() const {
    return total_samples_ * static_cast<std::size_t>(config_.sample_bytes);
}

double SignalBuffer::energy_j() const {
    return static_cast<double>(bits_written_ + bits_read_) * config_.sram_bit_energy_j;
}

// ---------------------------------------------------------------------------
// Accuracy

namespace {

struct Cell {
    long score;
    long matches;
    long length;
};

bool better(const Cell& a, const Cell& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.matches != b.matches) return a.matches > b.matches;
    return a.length < b.length;
}

}  // namespace

AlignmentResult align(std::string_view a, std::string_view b, const AlignmentScoring& sc) {
    const std::size_t m = b.size();
    std::vector<Cell> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = {static_cast<long>(j) * sc.gap, 0, static_cast<long>(j)};
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = {static_cast<long>(i) * sc.gap, 0, static_cast<long>(i)};
        for (std::size_t j = 1; j <= m; ++j) {
            const bool eq = a[i - 1] == b[j - 1];
            Cell best{prev[j - 1].score + (eq ? sc.match : sc.mismatch), prev[j - 1].matches + (eq ? 1 : 0),
                      prev[j - 1].length + 1};
            const Cell up{prev[j].score + sc.gap, prev[j].matches, prev[j].length + 1};
            const Cell left{cur[j - 1].score + sc.gap, cur[j - 1].matches, cur[j - 1].length + 1};
            if (better(up, best)) best = up;
            if (better(left, best)) best = left;
            cur[j] = best;
        }
        std::swap(prev, cur);
    }
    return {prev[m].score, prev[m].matches, prev[m].length};
}

double aligned_accuracy(std::string_view call, std::string_view reference, const AlignmentScoring& scoring) {
    if (call.empty() || reference.empty()) throw InputError("aligned_accuracy: empty sequence");
    return align(call, reference, scoring).identity();
}

// ---------------------------------------------------------------------------
// Data reduction

DataReductionReport data_reduction_report(std::span<const ReadVolume> reads, double raw_bytes_per_sample,
                                          double bytes_per_base, std::span<const StorageFormat> formats,
                                          double called_storage_bytes_per_base) {
    DataReductionReport r;
    r.reads = reads.size();
    if (reads.empty()) return r;
    double samples = 0, bases = 0;
    for (const auto& rv : reads) {
        samples += static_cast<double>(rv.samples);
        bases += static_cast<double>(rv.bases);
    }
    r.raw_bytes = samples * raw_bytes_per_sample;
    r.called_bytes = bases * bytes_per_base;
    r.communication_ratio = r.called_bytes > 0 ? r.raw_bytes / r.called_bytes : 0.0;
    const double stored_calls = bases * (called_storage_bytes_per_base > 0 ? called_storage_bytes_per_base : bytes_per_base);
    for (const auto& f : formats) {
        r.storage_ratios[f.name] = stored_calls > 0 ? samples * f.bytes_per_sample / stored_calls : 0.0;
    }
    return r;
}

VolumeTable VolumeTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read volume table " + path.string());
    try {
        json j;
        in >> j;
        auto row = [](const json& r) {
            Row out;
            out.dataset = r.value("dataset", "");
            out.reads = r.value("reads", 0L);
            out.raw_gb = r.at("raw_gb");
            out.string_gb = r.at("string_gb");
            if (r.contains("storage_gb")) out.storage_gb = r.at("storage_gb").get<std::map<std::string, double>>();
            return out;
        };
        VolumeTable t;
        for (const auto& r : j.at("rows")) t.rows.push_back(row(r));
        t.total = row(j.at("total"));
        return t;
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

double VolumeTable::storage_ratio(const std::string& numerator, const std::string& denominator) const {
    return total.storage_gb.at(numerator) / total.storage_gb.at(denominator);
}

// ---------------------------------------------------------------------------
// Files

namespace {

constexpr char kRawMagic[4] = {'C', 'M', 'R', 'W'};
constexpr std::uint32_t kRawVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    v = to_le32(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw InputError(path.string() + ": truncated raw file");
    return to_le32(v);
}

}  // namespace

void write_raw(const std::filesystem::path& path, const std::vector<SquiggleRead>& reads) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(kRawMagic, sizeof kRawMagic);
    put_u32(out, kRawVersion);
    put_u32(out, static_cast<std::uint32_t>(reads.size()));
    for (const auto& r : reads) {
        put_u32(out, r.channel);
        put_u32(out, static_cast<std::uint32_t>(r.samples.size()));
        for (float s : r.samples) put_u32(out, std::bit_cast<std::uint32_t>(s));
    }
    if (!out) throw InputError("write failed: " + path.string());
}

std::vector<SquiggleRead> read_raw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read raw file " + path.string());
    char magic[4] = {};
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 4, kRawMagic)) {
        throw InputError(path.string() + ": not a raw signal file");
    }
    if (get_u32(in, path) != kRawVersion) throw InputError(path.string() + ": unsupported raw file version");
    const std::uint32_t n = get_u32(in, path);
    std::vector<SquiggleRead> reads(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto& r = reads[i];
        r.channel = get_u32(in, path);
        r.id = "read" + std::to_string(i);
        r.samples.resize(get_u32(in, path));
        for (auto& s : r.samples) s = std::bit_cast<float>(get_u32(in, path));
    }
    return reads;
}

std::string to_fasta(const std::vector<FastaRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        out << '>' << r.name << '\n';
        for (std::size_t i = 0; i < r.sequence.size(); i += 80) out << r.sequence.substr(i, 80) << '\n';
    }
    return out.str();
}

void write_fasta(const std::filesystem::path& path, const std::vector<FastaRecord>& records) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_fasta(records);
}

std::vector<FastaRecord> read_fasta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read FASTA " + path.string());
    std::vector<FastaRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '>') {
            out.push_back({line.substr(1), {}});
        } else {
            if (out.empty()) throw InputError(path.string() + ": sequence before first header");
            for (char c : line) out.back().sequence.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

}  // namespace cimcall::pipeline
