#include "mirage/wire.hpp"

#include <benchmark/benchmark.h>

using namespace mirage;

static void EncodeDecodeMeasurement(benchmark::State& state) {
    VecX v(12);
    v.setRandom();
    for (auto _ : state) {
        const auto bytes = encode(make_measurement_msg(7, v));
        benchmark::DoNotOptimize(decode(bytes));
    }
}
BENCHMARK(EncodeDecodeMeasurement);

static void EncodeFrame(benchmark::State& state) {
    Frame f;
    f.width = 1280;
    f.height = 720;
    f.data.assign(static_cast<size_t>(f.width) * f.height, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode(make_frame_msg(3, f)));
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(f.data.size()));
}
BENCHMARK(EncodeFrame);

static void StreamDecode(benchmark::State& state) {
    std::vector<std::uint8_t> stream;
    VecX v(12);
    v.setRandom();
    for (int i = 0; i < 64; ++i) {
        const auto bytes = encode(make_measurement_msg(
            static_cast<std::uint64_t>(i), v));
        stream.insert(stream.end(), bytes.begin(), bytes.end());
    }
    for (auto _ : state) {
        StreamDecoder dec;
        dec.feed(stream.data(), stream.size());
        for (;;) {
            const DecodeResult r = dec.next();
            if (r.status != DecodeStatus::kOk) break;
            benchmark::DoNotOptimize(r.message.step);
        }
    }
}
BENCHMARK(StreamDecode);
