#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "stam/errors.hpp"
#include "stam/synthetic.hpp"

using namespace stam;

namespace {

NeedleTaskSpec small_spec() {
    NeedleTaskSpec spec;
    spec.feature_dim = 8;
    spec.train_size = 40;
    spec.test_size = 12;
    spec.seed = 11;
    return spec;
}

// Binomial Monte-Carlo tolerance: 3 standard errors at proportion p.
double three_se(double p, int draws) {
    return 3.0 * std::sqrt(p * (1.0 - p) / draws);
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("spec validation rejects malformed tasks") {
    NeedleTaskSpec spec;
    CHECK_NOTHROW(validate(spec));
    spec.signal_clips = 7;
    CHECK_THROWS_AS(validate(spec), ConfigError);
    spec = NeedleTaskSpec{};
    spec.num_classes = 1;
    CHECK_THROWS_AS(validate(spec), ConfigError);
    spec = NeedleTaskSpec{};
    spec.signal_clips = 0;
    CHECK_THROWS_AS(validate(spec), ConfigError);
    spec = NeedleTaskSpec{};
    spec.noise_std = -0.1;
    CHECK_THROWS_AS(validate(spec), ConfigError);
}

TEST_CASE("generation is bit-identical for a repeated seed") {
    NeedleTaskSpec spec = small_spec();
    NeedleDataset a = generate(spec);
    NeedleDataset b = generate(spec);
    REQUIRE(a.train.size() == b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].clips == b.train[i].clips);
        CHECK(a.train[i].label == b.train[i].label);
        CHECK(a.train[i].signal_mask == b.train[i].signal_mask);
    }
    spec.seed = 12;
    NeedleDataset c = generate(spec);
    CHECK(a.train[0].clips != c.train[0].clips);
}

TEST_CASE("train and test splits use distinct noise") {
    NeedleTaskSpec spec = small_spec();
    spec.test_size = spec.train_size;
    NeedleDataset data = generate(spec);
    CHECK(data.train[0].clips != data.test[0].clips);
}

TEST_CASE("labels are class balanced within one sample") {
    NeedleTaskSpec spec = small_spec();
    spec.train_size = 41;  // not divisible by C
    NeedleDataset data = generate(spec);
    std::vector<int> counts(spec.num_classes, 0);
    for (const LabeledSample& sample : data.train) {
        REQUIRE(sample.label >= 0);
        REQUIRE(sample.label < spec.num_classes);
        counts[sample.label]++;
    }
    double ideal = static_cast<double>(spec.train_size) / spec.num_classes;
    for (int count : counts) {
        CHECK(std::abs(count - ideal) <= 1.0);
    }
}

TEST_CASE("prototypes are unit norm and mutually separated") {
    NeedleDataset data = generate(small_spec());
    REQUIRE(static_cast<int>(data.prototypes.size()) == data.spec.num_classes);
    for (size_t a = 0; a < data.prototypes.size(); ++a) {
        double norm_sq = 0.0;
        for (double v : data.prototypes[a]) {
            norm_sq += v * v;
        }
        CHECK(std::abs(norm_sq - 1.0) <= 1e-12);
        for (size_t b = 0; b < a; ++b) {
            double dot = 0.0;
            for (int j = 0; j < data.spec.feature_dim; ++j) {
                dot += data.prototypes[a][j] * data.prototypes[b][j];
            }
            CHECK(dot < 0.5);
        }
    }
}

TEST_CASE("the noiseless limit embeds exactly one scaled prototype") {
    NeedleTaskSpec spec = small_spec();
    spec.noise_std = 0.0;
    spec.distractor_std = 0.0;
    spec.signal_strength = 2.0;
    NeedleDataset data = generate(spec);
    for (const LabeledSample& sample : data.train) {
        int ones = 0;
        for (int t = 0; t < spec.clip_count; ++t) {
            const double* clip = sample.clips.data() + t * spec.feature_dim;
            if (sample.signal_mask[t]) {
                ++ones;
                for (int j = 0; j < spec.feature_dim; ++j) {
                    CHECK(clip[j] == 2.0 * data.prototypes[sample.label][j]);
                }
            } else {
                for (int j = 0; j < spec.feature_dim; ++j) {
                    CHECK(clip[j] == 0.0);
                }
            }
        }
        CHECK(ones == spec.signal_clips);
    }
}

TEST_CASE("signal positions cover all slots across samples") {
    NeedleTaskSpec spec = small_spec();
    spec.train_size = 200;
    NeedleDataset data = generate(spec);
    std::vector<int> position_counts(spec.clip_count, 0);
    for (const LabeledSample& sample : data.train) {
        int ones = 0;
        for (int t = 0; t < spec.clip_count; ++t) {
            if (sample.signal_mask[t]) {
                ++ones;
                position_counts[t]++;
            }
        }
        CHECK(ones == spec.signal_clips);
    }
    for (int count : position_counts) {
        CHECK(count > 0);
    }
}

TEST_CASE("clips_tensor reshapes a sample into clip rows") {
    NeedleTaskSpec spec = small_spec();
    NeedleDataset data = generate(spec);
    Tensor clips = clips_tensor(data.train[3], spec);
    CHECK(clips.shape() == std::vector<int>{spec.clip_count, spec.feature_dim});
    CHECK(clips.values() == data.train[3].clips);
}

TEST_CASE("the signal oracle is exact in the noiseless limit") {
    NeedleTaskSpec spec = small_spec();
    spec.noise_std = 0.0;
    CHECK(oracle_signal_accuracy(spec, 2000) == 1.0);
}

TEST_CASE("oracles report chance when the prototype is invisible") {
    NeedleTaskSpec spec = small_spec();
    spec.signal_strength = 0.0;
    double chance = 1.0 / spec.num_classes;
    double tolerance = three_se(chance, 200000) + 1e-3;
    CHECK(std::abs(oracle_signal_accuracy(spec) - chance) <= tolerance);
    CHECK(std::abs(oracle_avg_accuracy(spec) - chance) <= tolerance);
}

TEST_CASE("averaging everything loses accuracy when signal is sparse") {
    NeedleTaskSpec spec;  // defaults: s=1 of N=6, sigma_d = sigma
    int draws = 200000;
    double signal = oracle_signal_accuracy(spec, draws);
    double avg = oracle_avg_accuracy(spec, draws);
    CHECK(avg <= signal + three_se(signal, draws));
}

TEST_CASE("masking out distractors never hurts the averaged oracle") {
    NeedleTaskSpec spec;
    int draws = 200000;
    double avg = oracle_avg_accuracy(spec, draws);
    double masked = oracle_masked_avg_accuracy(spec, draws);
    CHECK(masked >= avg - three_se(avg, draws));
}

TEST_CASE("with every clip carrying signal, averaging is at least as good") {
    NeedleTaskSpec spec;
    spec.signal_clips = spec.clip_count;
    spec.distractor_std = spec.noise_std;
    int draws = 200000;
    double signal = oracle_signal_accuracy(spec, draws);
    double avg = oracle_avg_accuracy(spec, draws);
    CHECK(avg >= signal - three_se(signal, draws));
}

TEST_CASE("a single clip makes the averaged and signal oracles coincide") {
    NeedleTaskSpec spec = small_spec();
    spec.clip_count = 1;
    spec.signal_clips = 1;
    int draws = 200000;
    double signal = oracle_signal_accuracy(spec, draws);
    double avg = oracle_avg_accuracy(spec, draws);
    CHECK(std::abs(signal - avg) <= 2.0 * three_se(signal, draws));
}

TEST_CASE("the oracle rejects nonpositive draw counts") {
    CHECK_THROWS_AS(oracle_signal_accuracy(small_spec(), 0), DomainError);
}

TEST_CASE("datasets round-trip through the binary format") {
    NeedleTaskSpec spec = small_spec();
    spec.train_size = 9;
    spec.test_size = 5;
    NeedleDataset data = generate(spec);
    std::filesystem::path path = temp_path("stam_roundtrip.stamds");
    save_dataset(data, path.string());
    NeedleDataset loaded = load_dataset(path.string());
    std::filesystem::remove(path);

    CHECK(loaded.spec.num_classes == spec.num_classes);
    CHECK(loaded.spec.clip_count == spec.clip_count);
    CHECK(loaded.spec.feature_dim == spec.feature_dim);
    CHECK(loaded.spec.signal_clips == spec.signal_clips);
    CHECK(loaded.spec.signal_strength == spec.signal_strength);
    CHECK(loaded.spec.noise_std == spec.noise_std);
    CHECK(loaded.spec.distractor_std == spec.distractor_std);
    CHECK(loaded.spec.seed == spec.seed);
    CHECK(loaded.prototypes == data.prototypes);
    REQUIRE(loaded.train.size() == data.train.size());
    REQUIRE(loaded.test.size() == data.test.size());
    for (size_t i = 0; i < data.train.size(); ++i) {
        CHECK(loaded.train[i].clips == data.train[i].clips);
        CHECK(loaded.train[i].label == data.train[i].label);
        CHECK(loaded.train[i].signal_mask == data.train[i].signal_mask);
    }
    for (size_t i = 0; i < data.test.size(); ++i) {
        CHECK(loaded.test[i].clips == data.test[i].clips);
        CHECK(loaded.test[i].label == data.test[i].label);
    }
}

TEST_CASE("corrupt dataset files are rejected") {
    std::filesystem::path bad_magic = temp_path("stam_bad_magic.stamds");
    {
        std::ofstream out(bad_magic, std::ios::binary);
        out << "NOTDATA and then some";
    }
    CHECK_THROWS_AS(load_dataset(bad_magic.string()), IoError);
    std::filesystem::remove(bad_magic);

    NeedleTaskSpec spec = small_spec();
    spec.train_size = 4;
    spec.test_size = 2;
    std::filesystem::path full = temp_path("stam_full.stamds");
    save_dataset(generate(spec), full.string());
    std::filesystem::path truncated = temp_path("stam_truncated.stamds");
    {
        std::ifstream in(full, std::ios::binary);
        std::vector<char> bytes(120);
        in.read(bytes.data(), bytes.size());
        std::ofstream out(truncated, std::ios::binary);
        out.write(bytes.data(), in.gcount());
    }
    CHECK_THROWS_AS(load_dataset(truncated.string()), IoError);
    std::filesystem::remove(full);
    std::filesystem::remove(truncated);

    CHECK_THROWS_AS(load_dataset(temp_path("stam_missing.stamds").string()), IoError);
}
