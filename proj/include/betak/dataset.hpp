#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "betak/model.hpp"

namespace betak {

struct Dataset {
    std::size_t classes = 0;
    std::size_t dim = 0;
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> eval;

    void validate() const;
    friend bool operator==(const Dataset& a, const Dataset& b);
};

/// Gaussian class clusters mapped affinely into [0,1]^dim.
///
/// Each class owns `modes_per_class` centres at distance `margin` from the
/// origin in random directions; samples add isotropic noise of std `noise`.
/// The affine map is shared by all samples, so geometry is preserved.
struct DatasetSpec {
    std::size_t classes = 8;
    std::size_t dim = 64;
    std::size_t train_per_class = 60;
    std::size_t eval_per_class = 100;
    double margin = 3.0;
    double noise = 1.0;
    std::size_t modes_per_class = 1;
    /// Raw magnitude mapped to the edge of [0,1]; 0 picks the largest |coordinate|.
    /// Larger values keep the clusters in a narrower band around 0.5.
    double spread = 6.0;
    std::uint64_t seed = 0;

    void validate() const;
};

Dataset generate_dataset(const DatasetSpec& spec);

/// Text container: header lines then `split,label,f_1,...,f_d` rows.
void save_dataset(const Dataset& data, std::ostream& out);
Dataset load_dataset(std::istream& in);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Accuracy of the nearest-class-mean classifier fit on train, scored on eval.
double nearest_centroid_accuracy(const Dataset& data);

}  // namespace betak
