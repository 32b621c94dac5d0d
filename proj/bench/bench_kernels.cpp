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

// Serial versus OpenMP kernels on shapes taken from the AL-Dorado layers.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cimcall/kernels.hpp"
#include "cimcall/pcm.hpp"

namespace {

using namespace cimcall;

std::vector<float> randn(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> d;
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

template <auto Kernel>
void BM_matvec(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto w = randn(n * n, 1);
    const auto x = randn(n, 2);
    std::vector<float> y(n);
    for (auto _ : state) {
        Kernel(w, x, {}, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

// 4000-sample chunk into the strided conv (16 -> 128 channels, k19, s5).
template <auto Kernel>
void BM_conv1d(benchmark::State& state) {
    kernels::ConvShape s{4000, 16, 128, 19, 5, 9};
    const auto in = randn(static_cast<std::size_t>(s.length * s.in_channels), 3);
    const auto w = randn(static_cast<std::size_t>(s.out_channels * s.in_channels * s.kernel_width), 4);
    std::vector<float> out(static_cast<std::size_t>(s.out_length() * s.out_channels));
    for (auto _ : state) {
        Kernel(s, in, w, {}, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Kernel>
void BM_crossbar(benchmark::State& state) {
    pcm::DeviceParams params;
    pcm::ProgrammedTile tile;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int r = 0; r < pcm::kTileDim; ++r)
        for (int c = 0; c < pcm::kTileDim; ++c) tile.at(r, c) = pcm::map_weight_to_conductance(u(rng), 1.0, params);
    tile.rows_used = tile.cols_used = pcm::kTileDim;
    std::vector<std::int8_t> input(pcm::kTileDim);
    for (auto& v : input) v = static_cast<std::int8_t>(rng() % 255 - 127);
    std::vector<double> acc(pcm::kTileDim);
    kernels::CrossbarRegion region{&tile, 0, 0, pcm::kTileDim, 3600.0, &params};
    for (auto _ : state) {
        Kernel(region, input, acc);
        benchmark::DoNotOptimize(acc.data());
    }
}

}  // namespace

BENCHMARK(BM_matvec<&kernels::serial::matvec>)->Name("matvec/serial")->Arg(512)->Arg(1024);
BENCHMARK(BM_matvec<&kernels::omp::matvec>)->Name("matvec/omp")->Arg(512)->Arg(1024);
BENCHMARK(BM_conv1d<&kernels::serial::conv1d>)->Name("conv1d/serial");
BENCHMARK(BM_conv1d<&kernels::omp::conv1d>)->Name("conv1d/omp");
BENCHMARK(BM_crossbar<&kernels::serial::crossbar_accumulate>)->Name("crossbar/serial");
BENCHMARK(BM_crossbar<&kernels::omp::crossbar_accumulate>)->Name("crossbar/omp");

BENCHMARK_MAIN();
