#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stam/rng.hpp"
#include "stam/tensor.hpp"

namespace stam {

/// Needle-clip task: s of N clips carry a noisy class prototype, the rest are
/// pure noise, and the needle positions are uniform per sample.
struct NeedleTaskSpec {
    int num_classes = 4;
    int clip_count = 6;
    int feature_dim = 32;
    int signal_clips = 1;
    double signal_strength = 1.0;  // prototype scale on signal clips
    double noise_std = 0.5;        // per-coordinate noise on signal clips
    double distractor_std = 0.5;   // per-coordinate scale of background clips
    int train_size = 2000;
    int test_size = 500;
    uint64_t seed = 1;
};

void validate(const NeedleTaskSpec& spec);

struct LabeledSample {
    std::vector<double> clips;  // N x D_f row-major
    int label;
    std::vector<uint8_t> signal_mask;  // length N, exactly s ones; metrics only
};

struct NeedleDataset {
    NeedleTaskSpec spec;
    std::vector<std::vector<double>> prototypes;  // C unit-norm vectors
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> test;
};

NeedleDataset generate(const NeedleTaskSpec& spec);

Tensor clips_tensor(const LabeledSample& sample, const NeedleTaskSpec& spec);

/// Monte-Carlo Bayes accuracy when the classifier sees the true signal clip
/// alone; upper-bounds every aggregator.
double oracle_signal_accuracy(const NeedleTaskSpec& spec, int draws = 200000);

/// Monte-Carlo Bayes accuracy on the mean over all clips, where the signal is
/// diluted by s/N and the distractor noise folds in.
double oracle_avg_accuracy(const NeedleTaskSpec& spec, int draws = 200000);

/// Same observation model as oracle_avg_accuracy but with the distractor
/// clips zeroed out; keeping only signal clips can never hurt the oracle.
double oracle_masked_avg_accuracy(const NeedleTaskSpec& spec, int draws = 200000);

/// Flat binary round-trip: "STAMDS1" magic, spec fields as little-endian
/// 64-bit words, then per-sample features (f64), label and mask words (u64).
void save_dataset(const NeedleDataset& dataset, const std::string& path);
NeedleDataset load_dataset(const std::string& path);

}  // namespace stam
