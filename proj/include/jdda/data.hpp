#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jdda/losses.hpp"
#include "jdda/matrix.hpp"

namespace jdda {

/// Features with labels in [0, class_count).
struct LabeledDataset {
    Matrix features;
    Labels labels;
    std::size_t class_count = 0;
    std::string provenance;

    std::size_t size() const noexcept { return features.rows(); }
    /// Throws std::invalid_argument if any invariant is broken.
    void validate() const;
};

class UnlabeledDataset;

/// Grants read access to held-out target labels. Only evaluation code can
/// mint one, so training code paths have no way to reach the labels.
class EvaluationKey {
    EvaluationKey() = default;
    friend struct EvaluationAccess;
};

/// Target-domain data. Held-out labels, when present, are readable only with
/// an EvaluationKey.
class UnlabeledDataset {
public:
    UnlabeledDataset() = default;
    explicit UnlabeledDataset(Matrix features, std::string provenance = {})
        : features_(std::move(features)), provenance_(std::move(provenance)) {}
    UnlabeledDataset(Matrix features, Labels held_out, std::size_t class_count,
                     std::string provenance = {});

    const Matrix& features() const noexcept { return features_; }
    std::size_t size() const noexcept { return features_.rows(); }
    const std::string& provenance() const noexcept { return provenance_; }
    bool has_held_out_labels() const noexcept { return held_out_.has_value(); }
    std::size_t class_count() const noexcept { return class_count_; }

    const Labels& held_out_labels(const EvaluationKey&) const;

private:
    Matrix features_;
    std::optional<Labels> held_out_;
    std::size_t class_count_ = 0;
    std::string provenance_;
};

/// The single place that may read held-out labels.
struct EvaluationAccess {
    static const Labels& labels(const UnlabeledDataset& d) { return d.held_out_labels(EvaluationKey{}); }
    /// Labeled view of a target set for reporting; throws if it has no labels.
    static LabeledDataset as_labeled(const UnlabeledDataset& d);
};

/// Source/target pair produced by a generator.
struct DomainPair {
    LabeledDataset source;
    UnlabeledDataset target;
};

/// Gaussian blobs in the source domain; the target applies
/// x ↦ scale·R(rotation)·x + translation (+ isotropic noise) to the same process.
/// Rotation acts on the first two coordinates.
struct SyntheticShiftSpec {
    std::size_t class_count = 3;
    std::size_t dim = 2;
    std::size_t source_per_class = 200;
    std::size_t target_per_class = 200;
    /// class_count × dim; empty means classes evenly spaced on a circle of `radius`.
    Matrix means;
    double radius = 3.0;
    /// Per-axis standard deviations of each blob; a single value applies to every axis.
    std::vector<double> spread{1.0};
    double rotation = 0.0;  // radians
    std::vector<double> translation;  // empty = zero
    double scale = 1.0;
    double noise = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    Matrix resolved_means() const;
};

DomainPair generate_shifted_gaussians(const SyntheticShiftSpec& spec);

/// Interleaved half-moons; class 0 lies on (cos t, sin t), class 1 on
/// (1 − cos t, 0.5 − sin t), t ∈ [0, π]. Requires class_count == 2 and dim == 2.
DomainPair generate_shifted_moons(const SyntheticShiftSpec& spec);
std::pair<double, double> moon_point(int label, double t) noexcept;

/// Applies the target transform of `spec` to one 2-D (or higher) point.
std::vector<double> apply_shift(const SyntheticShiftSpec& spec, std::span<const double> x);

// IDX: 4-byte big-endian magic (0x00000803 images, 0x00000801 labels), then
// big-endian u32 dimensions, then the raw u8 payload.
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImages {
    std::size_t count = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const IdxImages& images);
void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels);

/// Pixels scaled to [0,1] and flattened row-major. Without a labels file the
/// labels are all zero and class_count is 0 (use as an unlabeled domain).
LabeledDataset load_idx(const std::string& images_path,
                        const std::optional<std::string>& labels_path = std::nullopt);

/// Writes features (rounded back to u8) and labels as an IDX pair.
void save_idx(const LabeledDataset& dataset, std::size_t side, const std::string& images_path,
              const std::string& labels_path);

/// Bilinear resampling of square images, sampling at pixel centers with edge clamping.
LabeledDataset resample_image(const LabeledDataset& dataset, std::size_t target_side);
Matrix resample_images(const Matrix& images, std::size_t target_side);

/// Seeded random subset of at most `limit` samples, original order preserved.
LabeledDataset subsample(const LabeledDataset& dataset, std::size_t limit, std::uint64_t seed);

/// Header "label,f1,...,fd".
void write_dataset_csv(const LabeledDataset& dataset, const std::string& path);

/// Index batches over one dataset. Every epoch is a fresh seeded permutation;
/// a batch that runs past the epoch end continues into the next permutation.
class BatchSampler {
public:
    BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

    std::vector<std::size_t> next();
    std::size_t epoch() const noexcept { return epoch_; }

private:
    void reshuffle();

    std::size_t n_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

}  // namespace jdda
