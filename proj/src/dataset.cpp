#include "nnkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <string>

namespace nnkit {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DatasetError("cannot open " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path)
{
    if (offset + 4 > bytes.size())
        throw DatasetError(path.string() + ": truncated header");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset::Dataset(std::size_t input_dim, std::size_t num_classes)
    : input_dim_(input_dim), num_classes_(num_classes)
{
    if (input_dim == 0 || num_classes == 0)
        throw DatasetError("dataset needs a positive input dimension and class count");
}

void Dataset::check(const Sample& s) const
{
    if (s.input.size() != input_dim_)
        throw DatasetError("sample has dimension " + std::to_string(s.input.size()) +
                           ", dataset expects " + std::to_string(input_dim_));
    if (s.label >= num_classes_)
        throw DatasetError("label " + std::to_string(s.label) + " out of range [0, " +
                           std::to_string(num_classes_) + ")");
    for (double v : s.input)
        if (!(v >= 0.0 && v <= 1.0))
            throw DatasetError("sample feature " + std::to_string(v) + " outside [0, 1]");
}

void Dataset::load_train(std::vector<Sample> samples)
{
    for (const auto& s : samples)
        check(s);
    train_ = std::move(samples);
}

void Dataset::load_test(std::vector<Sample> samples)
{
    for (const auto& s : samples)
        check(s);
    test_ = std::move(samples);
}

void Dataset::add_train_sample(Sample sample)
{
    check(sample);
    train_.push_back(std::move(sample));
}

void Dataset::add_test_sample(Sample sample)
{
    check(sample);
    test_.push_back(std::move(sample));
}

std::vector<Sample> read_idx_samples(const std::filesystem::path& images,
                                     const std::filesystem::path& labels, std::size_t num_classes)
{
    auto img = read_bytes(images);
    auto lab = read_bytes(labels);

    if (read_be32(img, 0, images) != kImageMagic)
        throw DatasetError(images.string() + ": wrong magic number (expected 0x00000803)");
    if (read_be32(lab, 0, labels) != kLabelMagic)
        throw DatasetError(labels.string() + ": wrong magic number (expected 0x00000801)");

    const std::size_t n = read_be32(img, 4, images);
    const std::size_t rows = read_be32(img, 8, images);
    const std::size_t cols = read_be32(img, 12, images);
    const std::size_t n_labels = read_be32(lab, 4, labels);
    if (n != n_labels)
        throw DatasetError("count mismatch: " + std::to_string(n) + " images but " +
                           std::to_string(n_labels) + " labels");
    if (rows == 0 || cols == 0)
        throw DatasetError(images.string() + ": zero image dimension");

    const std::size_t d = rows * cols;
    const std::size_t img_expected = 16 + n * d;
    const std::size_t lab_expected = 8 + n;
    if (img.size() < img_expected)
        throw DatasetError(images.string() + ": truncated payload (" + std::to_string(img.size()) +
                           " bytes, expected " + std::to_string(img_expected) + ")");
    if (img.size() > img_expected)
        throw DatasetError(images.string() + ": trailing bytes after payload");
    if (lab.size() < lab_expected)
        throw DatasetError(labels.string() + ": truncated payload");
    if (lab.size() > lab_expected)
        throw DatasetError(labels.string() + ": trailing bytes after payload");

    std::vector<Sample> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Sample& s = out[k];
        s.input.resize(d);
        const unsigned char* px = img.data() + 16 + k * d;
        for (std::size_t i = 0; i < d; ++i)
            s.input[i] = static_cast<double>(px[i]) / 255.0;
        s.label = lab[8 + k];
        if (s.label >= num_classes)
            throw DatasetError(labels.string() + ": label " + std::to_string(s.label) +
                               " out of range");
    }
    return out;
}

void load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                      Split split, Dataset& into)
{
    auto samples = read_idx_samples(images, labels, into.num_classes());
    if (split == Split::Train)
        into.load_train(std::move(samples));
    else
        into.load_test(std::move(samples));
}

std::vector<Vector> blob_centers(const BlobSpec& spec)
{
    if (spec.num_classes < 2 || spec.dim == 0)
        throw DatasetError("synth_blobs needs at least 2 classes and dim >= 1");
    // Centres are drawn from a generator separate from the noise stream and
    // kept inside [0.2, 0.8]^d; redraw until pairwise distance is comfortable.
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> coord(0.2, 0.8);
    const double min_sep = 0.3;
    std::vector<Vector> centers;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        Vector best;
        double best_sep = -1.0;
        for (int attempt = 0; attempt < 200; ++attempt) {
            Vector cand(spec.dim);
            for (double& v : cand)
                v = coord(rng);
            double sep = std::numeric_limits<double>::infinity();
            for (const auto& other : centers) {
                double d2 = 0.0;
                for (std::size_t i = 0; i < spec.dim; ++i)
                    d2 += (cand[i] - other[i]) * (cand[i] - other[i]);
                sep = std::min(sep, std::sqrt(d2));
            }
            if (sep > best_sep) {
                best_sep = sep;
                best = cand;
            }
            if (sep >= min_sep)
                break;
        }
        centers.push_back(std::move(best));
    }
    return centers;
}

Dataset synth_blobs(const BlobSpec& spec)
{
    if (!(spec.spread >= 0.0) || !std::isfinite(spec.spread))
        throw DatasetError("synth_blobs spread must be finite and non-negative");
    auto centers = blob_centers(spec);
    Dataset ds(spec.dim, spec.num_classes);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Sample> train;
    std::vector<Sample> test;
    std::size_t index = 0;
    for (std::size_t k = 0; k < spec.n_per_class; ++k) {
        for (std::size_t c = 0; c < spec.num_classes; ++c, ++index) {
            Sample s{Vector(spec.dim), c};
            for (std::size_t i = 0; i < spec.dim; ++i)
                s.input[i] = std::clamp(centers[c][i] + spec.spread * noise(rng), 0.0, 1.0);
            (index % 5 == 4 ? test : train).push_back(std::move(s));
        }
    }
    ds.load_train(std::move(train));
    ds.load_test(std::move(test));
    return ds;
}

}  // namespace nnkit
