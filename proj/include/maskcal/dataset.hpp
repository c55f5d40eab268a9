#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "maskcal/tensor.hpp"

namespace maskcal {

enum class Split { train, calibration, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

// One manifest row. Paths are stored relative to the manifest file.
struct TripletRecord {
    std::string id;
    std::filesystem::path x;
    std::filesystem::path y_hat;
    std::filesystem::path y;
    std::optional<std::filesystem::path> mask;
    Split split = Split::train;
};

struct LoadedTriplet {
    std::string id;
    Image x;
    Image y_hat;
    Image y;
    std::optional<Mask> mask;
};

// Counts values clamped into [0, 1] while loading tensors as images.
struct ClampStats {
    std::size_t values = 0;
    std::size_t tensors = 0;
};

// Manifest-indexed triplet collection. The manifest is JSON lines, one object
// per record with keys {"id","x","y_hat","y","mask"(optional),"split"}.
class TripletDataset {
public:
    static TripletDataset load(const std::filesystem::path& manifest);
    void save(const std::filesystem::path& manifest) const;

    const std::filesystem::path& root() const { return root_; }
    const std::vector<TripletRecord>& records() const { return records_; }
    std::vector<TripletRecord>& records() { return records_; }

    // Records of one split, sorted by id ascending.
    std::vector<TripletRecord> split_records(Split split) const;

    LoadedTriplet load_triplet(const TripletRecord& rec, ClampStats* stats = nullptr) const;

    std::filesystem::path resolve(const std::filesystem::path& rel) const;

    TripletDataset() = default;
    explicit TripletDataset(std::filesystem::path root) : root_(std::move(root)) {}

private:
    std::filesystem::path root_;
    std::vector<TripletRecord> records_;
};

}  // namespace maskcal
