#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "nnkit/tensor.hpp"

namespace nnkit {

struct Sample {
    Vector input;  // entries in [0, 1]
    std::size_t label = 0;
    bool operator==(const Sample&) const = default;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Split { Train, Test };

// Train and test sample stores. Loading replaces a split wholesale; the add_*
// members are the only incremental mutation paths.
class Dataset {
public:
    Dataset(std::size_t input_dim, std::size_t num_classes);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t num_classes() const { return num_classes_; }
    const std::vector<Sample>& train() const { return train_; }
    const std::vector<Sample>& test() const { return test_; }
    const std::vector<Sample>& split(Split s) const { return s == Split::Train ? train_ : test_; }

    void load_train(std::vector<Sample> samples);
    void load_test(std::vector<Sample> samples);
    void add_train_sample(Sample sample);
    void add_test_sample(Sample sample);

    bool operator==(const Dataset&) const = default;

private:
    void check(const Sample& s) const;

    std::size_t input_dim_;
    std::size_t num_classes_;
    std::vector<Sample> train_;
    std::vector<Sample> test_;
};

// IDX image/label pair (MNIST distribution format). Pixels are scaled by 1/255
// and images flattened row-major.
std::vector<Sample> read_idx_samples(const std::filesystem::path& images,
                                     const std::filesystem::path& labels,
                                     std::size_t num_classes = 10);

// Loads one split of `into` from an IDX pair. The dataset's input_dim must
// equal rows * cols of the images file.
void load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                      Split split, Dataset& into);

struct BlobSpec {
    std::uint64_t seed = 1;
    std::size_t n_per_class = 100;
    std::size_t num_classes = 2;
    std::size_t dim = 2;
    double spread = 0.05;
};

// Seeded Gaussian blobs clipped to [0,1]^d. Every fifth sample (in generation
// order, classes interleaved) goes to the test split.
Dataset synth_blobs(const BlobSpec& spec);

// Class centres used by synth_blobs for the given spec.
std::vector<Vector> blob_centers(const BlobSpec& spec);

}  // namespace nnkit
