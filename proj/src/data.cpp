#include "jdda/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace jdda {

namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::uint32_t read_be32(std::istream& in, const std::string& path, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("idx: " + path + ": truncated header (" + what + ")");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
           std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(b, 4);
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);
    return in;
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t bytes, const std::string& path) {
    std::vector<std::uint8_t> payload(bytes);
    if (bytes > 0 && !in.read(reinterpret_cast<char*>(payload.data()),
                              static_cast<std::streamsize>(bytes)))
        throw std::runtime_error("idx: " + path + ": truncated payload, expected " +
                                 std::to_string(bytes) + " bytes");
    return payload;
}

std::size_t square_side(std::size_t pixels) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(pixels))));
    if (side * side != pixels)
        throw std::invalid_argument("resample_image: " + std::to_string(pixels) +
                                    " pixels do not form a square image");
    return side;
}

void add_noise(std::span<double> x, double noise, std::mt19937_64& rng) {
    if (noise <= 0.0) return;
    std::normal_distribution<double> n01(0.0, 1.0);
    for (double& v : x) v += noise * n01(rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets

void LabeledDataset::validate() const {
    if (features.rows() == 0) throw std::invalid_argument("dataset: no samples");
    if (labels.size() != features.rows())
        throw std::invalid_argument("dataset: label count differs from sample count");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= class_count)
            throw std::invalid_argument("dataset: label " + std::to_string(y) + " outside [0, " +
                                        std::to_string(class_count) + ")");
    if (!all_finite(features)) throw std::invalid_argument("dataset: non-finite feature value");
}

UnlabeledDataset::UnlabeledDataset(Matrix features, Labels held_out, std::size_t class_count,
                                   std::string provenance)
    : features_(std::move(features)),
      held_out_(std::move(held_out)),
      class_count_(class_count),
      provenance_(std::move(provenance)) {
    if (held_out_->size() != features_.rows())
        throw std::invalid_argument("UnlabeledDataset: held-out label count differs from sample count");
}

const Labels& UnlabeledDataset::held_out_labels(const EvaluationKey&) const {
    if (!held_out_) throw std::logic_error("UnlabeledDataset: no held-out labels");
    return *held_out_;
}

LabeledDataset EvaluationAccess::as_labeled(const UnlabeledDataset& d) {
    return LabeledDataset{d.features(), labels(d), d.class_count(), d.provenance()};
}

// ---------------------------------------------------------------------------
// Synthetic generators

void SyntheticShiftSpec::validate() const {
    if (class_count == 0) throw std::invalid_argument("synthetic spec: class_count must be >= 1");
    if (dim < 2) throw std::invalid_argument("synthetic spec: dim must be >= 2");
    if (source_per_class == 0 || target_per_class == 0)
        throw std::invalid_argument("synthetic spec: samples per class must be >= 1");
    if (spread.empty() || (spread.size() != 1 && spread.size() != dim))
        throw std::invalid_argument("synthetic spec: spread needs 1 or dim entries");
    for (double s : spread)
        if (!(s > 0.0)) throw std::invalid_argument("synthetic spec: spread must be > 0");
    if (!translation.empty() && translation.size() != dim)
        throw std::invalid_argument("synthetic spec: translation needs dim entries");
    if (!means.empty() && (means.rows() != class_count || means.cols() != dim))
        throw std::invalid_argument("synthetic spec: means must be class_count x dim");
    if (noise < 0.0) throw std::invalid_argument("synthetic spec: noise must be >= 0");
    if (!(scale > 0.0)) throw std::invalid_argument("synthetic spec: scale must be > 0");
}

Matrix SyntheticShiftSpec::resolved_means() const {
    if (!means.empty()) return means;
    Matrix m(class_count, dim);
    for (std::size_t c = 0; c < class_count; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                             static_cast<double>(class_count);
        m(c, 0) = radius * std::cos(angle);
        m(c, 1) = radius * std::sin(angle);
    }
    return m;
}

std::vector<double> apply_shift(const SyntheticShiftSpec& spec, std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    const double c = std::cos(spec.rotation);
    const double s = std::sin(spec.rotation);
    y[0] = c * x[0] - s * x[1];
    y[1] = s * x[0] + c * x[1];
    for (std::size_t k = 0; k < y.size(); ++k) {
        y[k] *= spec.scale;
        if (!spec.translation.empty()) y[k] += spec.translation[k];
    }
    return y;
}

namespace {

template <class Draw>
DomainPair generate_pair(const SyntheticShiftSpec& spec, const std::string& tag, Draw draw) {
    const std::size_t c = spec.class_count;
    auto make_domain = [&](std::size_t per_class, std::uint64_t stream, bool shifted,
                           Matrix& features, Labels& labels) {
        auto rng = stream_rng(spec.seed, stream);
        features = Matrix(per_class * c, spec.dim);
        labels.resize(per_class * c);
        std::size_t row = 0;
        for (std::size_t cls = 0; cls < c; ++cls) {
            for (std::size_t i = 0; i < per_class; ++i, ++row) {
                auto x = features.row(row);
                draw(static_cast<int>(cls), x, rng);
                add_noise(x, spec.noise, rng);
                if (shifted) {
                    const auto y = apply_shift(spec, x);
                    std::copy(y.begin(), y.end(), x.begin());
                }
                labels[row] = static_cast<int>(cls);
            }
        }
    };

    DomainPair pair;
    pair.source.class_count = c;
    pair.source.provenance = tag + ":source";
    make_domain(spec.source_per_class, 0, false, pair.source.features, pair.source.labels);
    Matrix target_features;
    Labels target_labels;
    make_domain(spec.target_per_class, 1, true, target_features, target_labels);
    pair.target = UnlabeledDataset(std::move(target_features), std::move(target_labels), c,
                                   tag + ":target");
    return pair;
}

}  // namespace

DomainPair generate_shifted_gaussians(const SyntheticShiftSpec& spec) {
    spec.validate();
    const Matrix means = spec.resolved_means();
    return generate_pair(spec, "gaussians", [&](int cls, std::span<double> x, std::mt19937_64& rng) {
        std::normal_distribution<double> n01(0.0, 1.0);
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double sd = spec.spread.size() == 1 ? spec.spread[0] : spec.spread[k];
            x[k] = means(static_cast<std::size_t>(cls), k) + sd * n01(rng);
        }
    });
}

std::pair<double, double> moon_point(int label, double t) noexcept {
    if (label == 0) return {std::cos(t), std::sin(t)};
    return {1.0 - std::cos(t), 0.5 - std::sin(t)};
}

DomainPair generate_shifted_moons(const SyntheticShiftSpec& spec) {
    if (spec.class_count != 2) throw std::invalid_argument("moons: class_count must be 2");
    if (spec.dim != 2) throw std::invalid_argument("moons: dim must be 2");
    spec.validate();
    return generate_pair(spec, "moons", [](int cls, std::span<double> x, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> arc(0.0, std::numbers::pi);
        const auto [px, py] = moon_point(cls, arc(rng));
        x[0] = px;
        x[1] = py;
    });
}

// ---------------------------------------------------------------------------
// IDX

IdxImages read_idx_images(const std::string& path) {
    auto in = open_binary(path);
    const std::uint32_t magic = read_be32(in, path, "magic");
    if (magic != kIdxImageMagic)
        throw std::runtime_error("idx: " + path + ": bad image magic 0x" + [&] {
            std::ostringstream os;
            os << std::hex << magic;
            return os.str();
        }());
    IdxImages images;
    images.count = read_be32(in, path, "count");
    images.height = read_be32(in, path, "rows");
    images.width = read_be32(in, path, "cols");
    images.pixels = read_payload(in, images.count * images.height * images.width, path);
    return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
    auto in = open_binary(path);
    const std::uint32_t magic = read_be32(in, path, "magic");
    if (magic != kIdxLabelMagic) throw std::runtime_error("idx: " + path + ": bad label magic");
    const std::uint32_t count = read_be32(in, path, "count");
    return read_payload(in, count, path);
}

void write_idx_images(const std::string& path, const IdxImages& images) {
    if (images.pixels.size() != images.count * images.height * images.width)
        throw std::invalid_argument("idx: pixel buffer does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("idx: cannot write " + path);
    write_be32(out, kIdxImageMagic);
    write_be32(out, static_cast<std::uint32_t>(images.count));
    write_be32(out, static_cast<std::uint32_t>(images.height));
    write_be32(out, static_cast<std::uint32_t>(images.width));
    out.write(reinterpret_cast<const char*>(images.pixels.data()),
              static_cast<std::streamsize>(images.pixels.size()));
    if (!out) throw std::runtime_error("idx: write failed for " + path);
}

void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("idx: cannot write " + path);
    write_be32(out, kIdxLabelMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
    if (!out) throw std::runtime_error("idx: write failed for " + path);
}

LabeledDataset load_idx(const std::string& images_path,
                        const std::optional<std::string>& labels_path) {
    const IdxImages images = read_idx_images(images_path);
    if (images.count == 0) throw std::runtime_error("idx: " + images_path + " holds no images");
    const std::size_t pixels = images.height * images.width;

    LabeledDataset ds;
    ds.provenance = images_path;
    ds.features = Matrix(images.count, pixels);
    auto values = ds.features.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = images.pixels[i] / 255.0;

    ds.labels.assign(images.count, 0);
    if (labels_path) {
        const auto raw = read_idx_labels(*labels_path);
        if (raw.size() != images.count)
            throw std::runtime_error("idx: " + std::to_string(raw.size()) + " labels for " +
                                     std::to_string(images.count) + " images");
        int max_label = 0;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            ds.labels[i] = raw[i];
            max_label = std::max(max_label, static_cast<int>(raw[i]));
        }
        ds.class_count = static_cast<std::size_t>(max_label) + 1;
    }
    return ds;
}

void save_idx(const LabeledDataset& dataset, std::size_t side, const std::string& images_path,
              const std::string& labels_path) {
    if (side * side != dataset.features.cols())
        throw std::invalid_argument("save_idx: feature width is not side*side");
    IdxImages images{dataset.size(), side, side, {}};
    images.pixels.reserve(dataset.features.size());
    for (double v : dataset.features.values())
        images.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    write_idx_images(images_path, images);
    std::vector<std::uint8_t> labels;
    for (int y : dataset.labels) labels.push_back(static_cast<std::uint8_t>(y));
    write_idx_labels(labels_path, labels);
}

// ---------------------------------------------------------------------------
// Preprocessing

Matrix resample_images(const Matrix& images, std::size_t target_side) {
    if (target_side == 0) throw std::invalid_argument("resample_image: target side must be >= 1");
    const std::size_t side = square_side(images.cols());
    Matrix out(images.rows(), target_side * target_side);
    const double ratio = static_cast<double>(side) / static_cast<double>(target_side);

    // Source coordinate of each output pixel center, split into the two taps and weight.
    struct Tap { std::size_t lo, hi; double w; };
    std::vector<Tap> taps(target_side);
    for (std::size_t o = 0; o < target_side; ++o) {
        double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(side - 1));
        const auto lo = static_cast<std::size_t>(std::floor(src));
        const std::size_t hi = std::min(lo + 1, side - 1);
        taps[o] = {lo, hi, src - static_cast<double>(lo)};
    }

    for (std::size_t n = 0; n < images.rows(); ++n) {
        auto src = images.row(n);
        auto dst = out.row(n);
        for (std::size_t r = 0; r < target_side; ++r) {
            const Tap& ty = taps[r];
            for (std::size_t c = 0; c < target_side; ++c) {
                const Tap& tx = taps[c];
                const double top = (1.0 - tx.w) * src[ty.lo * side + tx.lo] + tx.w * src[ty.lo * side + tx.hi];
                const double bottom = (1.0 - tx.w) * src[ty.hi * side + tx.lo] + tx.w * src[ty.hi * side + tx.hi];
                dst[r * target_side + c] = std::clamp((1.0 - ty.w) * top + ty.w * bottom, 0.0, 1.0);
            }
        }
    }
    return out;
}

LabeledDataset resample_image(const LabeledDataset& dataset, std::size_t target_side) {
    LabeledDataset out = dataset;
    out.features = resample_images(dataset.features, target_side);
    return out;
}

LabeledDataset subsample(const LabeledDataset& dataset, std::size_t limit, std::uint64_t seed) {
    if (limit == 0 || limit >= dataset.size()) return dataset;
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = stream_rng(seed, 7);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
    LabeledDataset out;
    out.features = gather_rows(dataset.features, idx);
    for (std::size_t i : idx) out.labels.push_back(dataset.labels[i]);
    out.class_count = dataset.class_count;
    out.provenance = dataset.provenance + "[subsample " + std::to_string(limit) + "]";
    return out;
}

void write_dataset_csv(const LabeledDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    out << "label";
    for (std::size_t k = 0; k < dataset.features.cols(); ++k) out << ",f" << (k + 1);
    out << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out << dataset.labels[i];
        for (double v : dataset.features.row(i)) out << ',' << v;
        out << '\n';
    }
    if (!out) throw std::runtime_error("csv: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Sampling

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : n_(dataset_size), batch_size_(batch_size), seed_(seed) {
    if (n_ == 0) throw std::invalid_argument("BatchSampler: empty dataset");
    if (batch_size_ == 0) throw std::invalid_argument("BatchSampler: batch size must be >= 1");
    if (batch_size_ > n_)
        throw std::invalid_argument("BatchSampler: batch size " + std::to_string(batch_size_) +
                                    " exceeds dataset size " + std::to_string(n_));
    reshuffle();
}

void BatchSampler::reshuffle() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    auto rng = stream_rng(seed_, 1000 + epoch_);
    std::shuffle(order_.begin(), order_.end(), rng);
    cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
    std::vector<std::size_t> batch;
    batch.reserve(batch_size_);
    while (batch.size() < batch_size_) {
        if (cursor_ == n_) {
            ++epoch_;
            reshuffle();
        }
        batch.push_back(order_[cursor_++]);
    }
    return batch;
}

}  // namespace jdda
