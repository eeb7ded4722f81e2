#include "stam/synthetic.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "stam/errors.hpp"

namespace stam {

namespace {

constexpr char kMagic[8] = "STAMDS1";  // 7 chars + NUL

std::vector<std::vector<double>> draw_prototypes(const NeedleTaskSpec& spec) {
    SplitRng rng = SplitRng(spec.seed).split("prototypes");
    std::vector<std::vector<double>> prototypes;
    prototypes.reserve(spec.num_classes);
    int attempts = 0;
    while (static_cast<int>(prototypes.size()) < spec.num_classes) {
        if (++attempts > 100000) {
            throw NumericalError("prototype rejection sampling failed; " +
                                 std::to_string(spec.num_classes) + " separated classes do not " +
                                 "fit in dimension " + std::to_string(spec.feature_dim));
        }
        std::vector<double> candidate(spec.feature_dim);
        double norm_sq = 0.0;
        for (double& v : candidate) {
            v = rng.next_gaussian(0.0, 1.0);
            norm_sq += v * v;
        }
        if (norm_sq < 1e-24) {
            continue;
        }
        double inv_norm = 1.0 / std::sqrt(norm_sq);
        for (double& v : candidate) {
            v *= inv_norm;
        }
        bool separated = true;
        for (const auto& other : prototypes) {
            double dot = 0.0;
            for (int j = 0; j < spec.feature_dim; ++j) {
                dot += candidate[j] * other[j];
            }
            if (dot >= 0.5) {
                separated = false;
                break;
            }
        }
        if (separated) {
            prototypes.push_back(std::move(candidate));
        }
    }
    return prototypes;
}

std::vector<LabeledSample> generate_split(const NeedleTaskSpec& spec,
                                          const std::vector<std::vector<double>>& prototypes,
                                          const std::string& split_name, int size) {
    SplitRng split_rng = SplitRng(spec.seed).split(split_name);

    // Round-robin labels shuffled once keep classes balanced within one sample.
    std::vector<int> labels(size);
    for (int i = 0; i < size; ++i) {
        labels[i] = i % spec.num_classes;
    }
    SplitRng label_rng = split_rng.split("labels");
    label_rng.shuffle(labels);

    std::vector<LabeledSample> samples;
    samples.reserve(size);
    for (int i = 0; i < size; ++i) {
        SplitRng sample_rng = split_rng.split(std::to_string(i));
        LabeledSample sample;
        sample.label = labels[i];
        sample.signal_mask.assign(spec.clip_count, 0);
        std::vector<int> positions(spec.clip_count);
        for (int t = 0; t < spec.clip_count; ++t) {
            positions[t] = t;
        }
        sample_rng.shuffle(positions);
        for (int k = 0; k < spec.signal_clips; ++k) {
            sample.signal_mask[positions[k]] = 1;
        }
        sample.clips.resize(static_cast<size_t>(spec.clip_count) * spec.feature_dim);
        const std::vector<double>& prototype = prototypes[sample.label];
        for (int t = 0; t < spec.clip_count; ++t) {
            double* clip = sample.clips.data() + static_cast<size_t>(t) * spec.feature_dim;
            if (sample.signal_mask[t]) {
                for (int j = 0; j < spec.feature_dim; ++j) {
                    clip[j] = spec.signal_strength * prototype[j] +
                              sample_rng.next_gaussian(0.0, spec.noise_std);
                }
            } else {
                for (int j = 0; j < spec.feature_dim; ++j) {
                    clip[j] = sample_rng.next_gaussian(0.0, spec.distractor_std);
                }
            }
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

/// Bayes accuracy when the observation is mean*prototype[label] + isotropic
/// Gaussian noise: equal-norm prototypes make argmax of the dot product the
/// Bayes rule.
double dot_rule_accuracy(const NeedleTaskSpec& spec, double mean_scale, double noise_std,
                         int draws, const std::string& stream) {
    if (draws < 1) {
        throw DomainError("oracle: draws must be positive");
    }
    std::vector<std::vector<double>> prototypes = draw_prototypes(spec);
    SplitRng rng = SplitRng(spec.seed).split(stream);
    std::vector<double> observation(spec.feature_dim);
    long long correct = 0;
    for (int i = 0; i < draws; ++i) {
        int label = i % spec.num_classes;
        const std::vector<double>& prototype = prototypes[label];
        for (int j = 0; j < spec.feature_dim; ++j) {
            observation[j] = mean_scale * prototype[j] + rng.next_gaussian(0.0, noise_std);
        }
        int best = 0;
        double best_score = 0.0;
        for (int c = 0; c < spec.num_classes; ++c) {
            double score = 0.0;
            for (int j = 0; j < spec.feature_dim; ++j) {
                score += observation[j] * prototypes[c][j];
            }
            if (c == 0 || score > best_score) {
                best = c;
                best_score = score;
            }
        }
        if (best == label) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / draws;
}

void put_u64(std::ostream& out, uint64_t value) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    out.write(bytes, 8);
}

void put_f64(std::ostream& out, double value) {
    uint64_t bits;
    std::memcpy(&bits, &value, 8);
    put_u64(out, bits);
}

uint64_t get_u64(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
        throw IoError("dataset file truncated");
    }
    uint64_t value = 0;
    for (int i = 0; i < 8; ++i) {
        value |= static_cast<uint64_t>(bytes[i]) << (8 * i);
    }
    return value;
}

double get_f64(std::istream& in) {
    uint64_t bits = get_u64(in);
    double value;
    std::memcpy(&value, &bits, 8);
    return value;
}

void write_samples(std::ostream& out, const std::vector<LabeledSample>& samples) {
    for (const LabeledSample& sample : samples) {
        for (double v : sample.clips) {
            put_f64(out, v);
        }
    }
    for (const LabeledSample& sample : samples) {
        put_u64(out, static_cast<uint64_t>(sample.label));
    }
    for (const LabeledSample& sample : samples) {
        for (uint8_t bit : sample.signal_mask) {
            put_u64(out, bit);
        }
    }
}

std::vector<LabeledSample> read_samples(std::istream& in, const NeedleTaskSpec& spec, int size) {
    std::vector<LabeledSample> samples(size);
    for (LabeledSample& sample : samples) {
        sample.clips.resize(static_cast<size_t>(spec.clip_count) * spec.feature_dim);
        for (double& v : sample.clips) {
            v = get_f64(in);
        }
    }
    for (LabeledSample& sample : samples) {
        uint64_t label = get_u64(in);
        if (label >= static_cast<uint64_t>(spec.num_classes)) {
            throw IoError("dataset file corrupt: label " + std::to_string(label) + " out of range");
        }
        sample.label = static_cast<int>(label);
    }
    for (LabeledSample& sample : samples) {
        sample.signal_mask.resize(spec.clip_count);
        int ones = 0;
        for (uint8_t& bit : sample.signal_mask) {
            uint64_t word = get_u64(in);
            if (word > 1) {
                throw IoError("dataset file corrupt: mask entry " + std::to_string(word));
            }
            bit = static_cast<uint8_t>(word);
            ones += bit;
        }
        if (ones != spec.signal_clips) {
            throw IoError("dataset file corrupt: mask has " + std::to_string(ones) +
                          " signal clips, spec says " + std::to_string(spec.signal_clips));
        }
    }
    return samples;
}

}  // namespace

void validate(const NeedleTaskSpec& spec) {
    if (spec.num_classes < 2) {
        throw ConfigError("task needs at least 2 classes, got " +
                          std::to_string(spec.num_classes));
    }
    if (spec.clip_count < 1 || spec.feature_dim < 1) {
        throw ConfigError("task needs positive clip count and feature dimension");
    }
    if (spec.signal_clips < 1 || spec.signal_clips > spec.clip_count) {
        throw ConfigError("signal clips " + std::to_string(spec.signal_clips) +
                          " must lie in [1, " + std::to_string(spec.clip_count) + "]");
    }
    if (spec.signal_strength < 0.0 || spec.noise_std < 0.0 || spec.distractor_std < 0.0) {
        throw ConfigError("task scales must be nonnegative");
    }
    if (spec.train_size < 0 || spec.test_size < 0) {
        throw ConfigError("task split sizes must be nonnegative");
    }
}

NeedleDataset generate(const NeedleTaskSpec& spec) {
    validate(spec);
    NeedleDataset dataset;
    dataset.spec = spec;
    dataset.prototypes = draw_prototypes(spec);
    dataset.train = generate_split(spec, dataset.prototypes, "train", spec.train_size);
    dataset.test = generate_split(spec, dataset.prototypes, "test", spec.test_size);
    return dataset;
}

Tensor clips_tensor(const LabeledSample& sample, const NeedleTaskSpec& spec) {
    return Tensor::from_values({spec.clip_count, spec.feature_dim}, sample.clips);
}

double oracle_signal_accuracy(const NeedleTaskSpec& spec, int draws) {
    validate(spec);
    return dot_rule_accuracy(spec, spec.signal_strength, spec.noise_std, draws, "oracle-signal");
}

double oracle_avg_accuracy(const NeedleTaskSpec& spec, int draws) {
    validate(spec);
    double n = spec.clip_count;
    double s = spec.signal_clips;
    double mean_scale = s / n * spec.signal_strength;
    double variance = (s * spec.noise_std * spec.noise_std +
                       (n - s) * spec.distractor_std * spec.distractor_std) /
                      (n * n);
    return dot_rule_accuracy(spec, mean_scale, std::sqrt(variance), draws, "oracle-avg");
}

double oracle_masked_avg_accuracy(const NeedleTaskSpec& spec, int draws) {
    validate(spec);
    double n = spec.clip_count;
    double s = spec.signal_clips;
    double mean_scale = s / n * spec.signal_strength;
    double variance = s * spec.noise_std * spec.noise_std / (n * n);
    return dot_rule_accuracy(spec, mean_scale, std::sqrt(variance), draws, "oracle-masked");
}

void save_dataset(const NeedleDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out.write(kMagic, 7);
    const NeedleTaskSpec& spec = dataset.spec;
    put_u64(out, static_cast<uint64_t>(spec.num_classes));
    put_u64(out, static_cast<uint64_t>(spec.clip_count));
    put_u64(out, static_cast<uint64_t>(spec.feature_dim));
    put_u64(out, static_cast<uint64_t>(spec.signal_clips));
    put_f64(out, spec.signal_strength);
    put_f64(out, spec.noise_std);
    put_f64(out, spec.distractor_std);
    put_u64(out, static_cast<uint64_t>(spec.train_size));
    put_u64(out, static_cast<uint64_t>(spec.test_size));
    put_u64(out, spec.seed);
    write_samples(out, dataset.train);
    write_samples(out, dataset.test);
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

NeedleDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    char magic[7];
    if (!in.read(magic, 7) || std::memcmp(magic, kMagic, 7) != 0) {
        throw IoError("'" + path + "' is not a STAMDS1 dataset");
    }
    NeedleTaskSpec spec;
    spec.num_classes = static_cast<int>(get_u64(in));
    spec.clip_count = static_cast<int>(get_u64(in));
    spec.feature_dim = static_cast<int>(get_u64(in));
    spec.signal_clips = static_cast<int>(get_u64(in));
    spec.signal_strength = get_f64(in);
    spec.noise_std = get_f64(in);
    spec.distractor_std = get_f64(in);
    spec.train_size = static_cast<int>(get_u64(in));
    spec.test_size = static_cast<int>(get_u64(in));
    spec.seed = get_u64(in);
    validate(spec);

    NeedleDataset dataset;
    dataset.spec = spec;
    dataset.prototypes = draw_prototypes(spec);
    dataset.train = read_samples(in, spec, spec.train_size);
    dataset.test = read_samples(in, spec, spec.test_size);
    return dataset;
}

}  // namespace stam
