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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <numeric>

#include "cimcall/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cimcall;
using namespace cimcall::pipeline;

namespace {

// Calls that a perfect basecaller would emit for each chunk: every base
// whose first sample lies inside the chunk, at the frame holding that sample.
std::vector<ChunkCall> truth_calls(const SquiggleRead& read, const ChunkPlan& plan, int spf) {
    std::vector<ChunkCall> calls;
    for (const auto& c : chunk(read.samples, plan)) {
        ChunkCall call;
        call.valid_frames = static_cast<int>((c.valid + spf - 1) / spf);
        for (std::size_t b = 0; b < read.sequence.size(); ++b) {
            const auto s = read.base_starts[b];
            if (s < c.start || s >= c.start + c.valid) continue;
            call.bases.push_back(read.sequence[b]);
            call.base_frames.push_back(static_cast<int>((s - c.start) / spf));
        }
        calls.push_back(std::move(call));
    }
    return calls;
}

}  // namespace

TEST_CASE("pore model") {
    auto m = PoreModel::random(6, 1);
    CHECK(m.levels.size() == 4096);
    CHECK_NOTHROW(m.validate());
    m.levels.pop_back();
    CHECK_THROWS_AS(m.validate(), ConfigError);
    auto t = PoreModel::random(3, 2);
    // centred k-mer, 'A' padding outside the sequence
    CHECK(t.level_at("CGT", 0) == t.levels[0 * 16 + 1 * 4 + 2]);
    CHECK(t.level_at("CGT", 1) == t.levels[1 * 16 + 2 * 4 + 3]);
    CHECK(t.level_at("CGT", 2) == t.levels[2 * 16 + 3 * 4 + 0]);
}

TEST_CASE("synthetic squiggles") {
    SUBCASE("noise-free unit dwell reproduces the table") {
        auto m = PoreModel::random(5, 4, 0.0, 1.0);
        const std::string seq = "ACGTTGCAAGT";
        const auto r = synth_squiggle(seq, m, 9);
        REQUIRE(r.samples.size() == seq.size());
        for (std::size_t i = 0; i < seq.size(); ++i) CHECK(r.samples[i] == m.level_at(seq, i));
        CHECK(r.base_starts[3] == 3);
    }
    SUBCASE("mean dwell") {
        auto m = PoreModel::random(6, 4);
        Rng rng(1);
        const auto seq = random_sequence(1000, rng);
        int within = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto n = synth_squiggle(seq, m, seed).samples.size();
            within += (n >= 9000 && n <= 11000);
        }
        CHECK(within >= 95);
    }
    SUBCASE("determinism and alphabet") {
        auto m = PoreModel::random(6, 4);
        CHECK(synth_squiggle("ACGTACGT", m, 3).samples == synth_squiggle("ACGTACGT", m, 3).samples);
        CHECK(synth_squiggle("ACGTACGT", m, 3).samples != synth_squiggle("ACGTACGT", m, 4).samples);
        CHECK_THROWS_AS(synth_squiggle("ACGN", m, 1), InputError);
        CHECK_THROWS_AS(synth_squiggle("", m, 1), InputError);
    }
}

TEST_CASE("chunk plan") {
    const ChunkPlan plan;
    CHECK(plan.starts(11000) == std::vector<std::size_t>{0, 3500, 7000});
    CHECK(plan.duplicated_fraction() == 0.25);
    std::vector<float> short_read(1500, 1.0f);
    const auto one = chunk(short_read, plan);
    REQUIRE(one.size() == 1);
    CHECK(one[0].padded);
    CHECK(one[0].valid == 1500);
    CHECK(one[0].samples.size() == 4000);
    CHECK(one[0].samples[1499] == 1.0f);
    CHECK(one[0].samples[1500] == 0.0f);
    CHECK_THROWS_AS((ChunkPlan{100, 100}.validate()), ConfigError);
    CHECK_THROWS_AS(chunk(std::span<const float>{}, plan), InputError);
}

TEST_CASE("chunks cover the read with the planned overlap") {
    for (const ChunkPlan plan : {ChunkPlan{}, ChunkPlan{500, 100}, ChunkPlan{64, 0}}) {
        for (std::size_t len : {1u, 63u, 500u, 4000u, 4001u, 11000u, 23456u}) {
            std::vector<float> s(len);
            std::iota(s.begin(), s.end(), 0.0f);
            const auto chunks = chunk(s, plan);
            std::vector<int> cover(len, 0);
            for (std::size_t i = 0; i < chunks.size(); ++i) {
                const auto& c = chunks[i];
                if (i > 0) CHECK(c.start - chunks[i - 1].start == static_cast<std::size_t>(plan.stride()));
                for (std::size_t k = 0; k < c.valid; ++k) {
                    CHECK(c.samples[k] == s[c.start + k]);
                    ++cover[c.start + k];
                }
                CHECK(c.padded == (i + 1 == chunks.size() && c.valid < static_cast<std::size_t>(plan.chunk_size)));
            }
            for (std::size_t k = 0; k < len; ++k) CHECK(cover[k] >= 1);
            if (chunks.size() > 1) {
                // interior boundaries overlap by exactly `overlap` samples
                const std::size_t dup = std::count(cover.begin(), cover.end(), 2);
                CHECK(dup == (chunks.size() - 2) * plan.overlap +
                                 std::min<std::size_t>(plan.overlap, chunks.back().valid));
            }
        }
    }
}

TEST_CASE("stitch") {
    const ChunkPlan plan;
    SUBCASE("single chunk is identity") {
        ChunkCall c{"ACGT", {0, 3, 9, 700}, 800};
        CHECK(stitch({c}, plan, 5) == "ACGT");
    }
    SUBCASE("zero overlap concatenates") {
        ChunkCall a{"AC", {0, 799}, 800}, b{"GT", {0, 5}, 800};
        CHECK(stitch({a, b}, ChunkPlan{4000, 0}, 5) == "ACGT");
    }
    SUBCASE("ground-truth chunk calls reassemble the read") {
        auto m = PoreModel::random(6, 7, 0.0);
        Rng rng(2);
        for (int trial = 0; trial < 10; ++trial) {
            const auto seq = random_sequence(600 + 300 * trial, rng);
            const auto read = synth_squiggle(seq, m, trial);
            for (const ChunkPlan p : {ChunkPlan{}, ChunkPlan{500, 100}}) {
                const auto calls = truth_calls(read, p, 5);
                const auto s = stitch(calls, p, 5);
                CHECK(s == seq);
            }
        }
    }
    CHECK_THROWS_AS(stitch({}, plan, 5), InputError);
}

TEST_CASE("signal buffer") {
    const SignalBufferConfig cfg;
    CHECK(cfg.channel_capacity_samples() == 1254);
    CHECK(cfg.total_bytes() == 512u * 2508u);
    // 512 channels of 2.45 kB is 1.25 MB up to the rounding of 2508.8 bytes
    CHECK(std::abs(static_cast<double>(cfg.total_bytes()) - 512 * 2508.8) < 512);
    CHECK(std::abs(static_cast<double>(cfg.total_bytes()) / (1 << 20) - 1.25) < 0.03);

    SignalBuffer buf(cfg);
    std::vector<float> full(cfg.channel_capacity_samples());
    std::iota(full.begin(), full.end(), 0.0f);
    buf.ingest(3, full);
    CHECK(buf.occupancy_bytes(3) <= cfg.channel_bytes);
    const float one = 1.0f;
    CHECK_THROWS_AS(buf.ingest(3, {&one, 1}), InputError);
    CHECK(buf.occupancy_samples(3) == full.size());
    CHECK_THROWS_AS(buf.ingest(512, {&one, 1}), InputError);

    const auto head = buf.drain(3, 10);
    CHECK(head == std::vector<float>(full.begin(), full.begin() + 10));
    buf.ingest(3, {&one, 1});
    const auto rest = buf.drain(3, 10000);
    CHECK(rest.size() == full.size() - 10 + 1);
    CHECK(rest.front() == 10.0f);
    CHECK(rest.back() == 1.0f);
    CHECK(buf.total_occupancy_bytes() == 0);
    CHECK(buf.bits_written() == buf.bits_read());
    CHECK(buf.energy_j() == doctest::Approx(2.0 * buf.bits_written() * 2.5e-15));

    SignalBuffer all(cfg);
    for (int ch = 0; ch < 512; ++ch) all.ingest(ch, full);
    CHECK(all.total_occupancy_bytes() <= cfg.total_bytes());
    CHECK(all.total_occupancy_bytes() == 512u * 2508u);
}

TEST_CASE("aligned accuracy") {
    CHECK(aligned_accuracy("ACGTACGT", "ACGTACGT") == 1.0);
    CHECK(aligned_accuracy("ACGT", "ACGG") == 0.75);
    CHECK(aligned_accuracy("AAAA", "TTTT") == 0.0);
    CHECK_THROWS_AS(aligned_accuracy("", "A"), InputError);

    Rng rng(12);
    std::uniform_int_distribution<int> len(1, 6);
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = random_sequence(static_cast<std::size_t>(len(rng)), rng);
        const auto b = random_sequence(static_cast<std::size_t>(len(rng)), rng);
        const double acc = aligned_accuracy(a, b);
        CHECK(acc == doctest::Approx(oracle::exhaustive_identity(a, b)));
        CHECK(acc == aligned_accuracy(b, a));
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
}

TEST_CASE("data reduction") {
    std::vector<ReadVolume> reads{{10000, 1000}, {5000, 500}};
    const auto r = data_reduction_report(reads, 4.0, 1.0);
    CHECK(r.communication_ratio == 40.0);
    CHECK(data_reduction_report({}, 4.0, 1.0).reads == 0);
    CHECK(data_reduction_report({}, 4.0, 1.0).communication_ratio == 0.0);

    const auto t = VolumeTable::load(testsupport::fixture_dir() / "dataset_volumes.json");
    CHECK(t.rows.size() == 9);
    CHECK(t.communication_ratio() == doctest::Approx(43.7).epsilon(0.5 / 43.7));
    CHECK(t.storage_ratio("FAST5", "FASTQ") == doctest::Approx(4.37).epsilon(0.005));
    CHECK(t.storage_ratio("FAST5", "POD5") == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("raw and fasta files") {
    const auto dir = std::filesystem::temp_directory_path() / "cimcall_test_pipeline";
    std::filesystem::create_directories(dir);
    auto m = PoreModel::random(4, 1);
    std::vector<SquiggleRead> reads{synth_squiggle("ACGTTGCA", m, 1), synth_squiggle("GGGTTTAAAC", m, 2)};
    reads[1].channel = 77;
    write_raw(dir / "x.raw", reads);
    const auto back = read_raw(dir / "x.raw");
    REQUIRE(back.size() == 2);
    CHECK(back[1].channel == 77);
    CHECK(back[0].samples == reads[0].samples);
    CHECK(back[1].samples == reads[1].samples);
    CHECK_THROWS_AS(read_raw(dir / "nope.raw"), InputError);
    {
        std::ofstream bad(dir / "bad.raw");
        bad << "garbage";
    }
    CHECK_THROWS_AS(read_raw(dir / "bad.raw"), InputError);

    std::string long_seq(200, 'C');
    write_fasta(dir / "x.fa", {{"r1", "ACGT"}, {"r2", long_seq}});
    const auto fa = read_fasta(dir / "x.fa");
    REQUIRE(fa.size() == 2);
    CHECK(fa[0].name == "r1");
    CHECK(fa[1].sequence == long_seq);
    std::filesystem::remove_all(dir);
}
