#include "maskcal/dataset.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "maskcal/util.hpp"

namespace maskcal {

using nlohmann::json;

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::calibration: return "calibration";
        case Split::test: return "test";
    }
    throw DomainError("bad split value");
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "calibration") return Split::calibration;
    if (s == "test") return Split::test;
    throw FormatError("unknown split '" + s + "'");
}

TripletDataset TripletDataset::load(const std::filesystem::path& manifest) {
    TripletDataset ds(manifest.parent_path());
    std::istringstream in(read_file(manifest));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        TripletRecord rec;
        try {
            rec.id = j.at("id").get<std::string>();
            rec.x = j.at("x").get<std::string>();
            rec.y_hat = j.at("y_hat").get<std::string>();
            rec.y = j.at("y").get<std::string>();
            rec.split = parse_split(j.at("split").get<std::string>());
            if (j.contains("mask") && !j["mask"].is_null()) {
                rec.mask = std::filesystem::path(j["mask"].get<std::string>());
            }
        } catch (const json::exception& e) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        ds.records_.push_back(std::move(rec));
    }
    return ds;
}

void TripletDataset::save(const std::filesystem::path& manifest) const {
    std::string out;
    for (const auto& rec : records_) {
        json j;
        j["id"] = rec.id;
        j["x"] = rec.x.generic_string();
        j["y_hat"] = rec.y_hat.generic_string();
        j["y"] = rec.y.generic_string();
        if (rec.mask) j["mask"] = rec.mask->generic_string();
        j["split"] = to_string(rec.split);
        out += j.dump();
        out += "\n";
    }
    write_file_atomic(manifest, out);
}

std::vector<TripletRecord> TripletDataset::split_records(Split split) const {
    std::vector<TripletRecord> out;
    for (const auto& rec : records_) {
        if (rec.split == split) out.push_back(rec);
    }
    std::sort(out.begin(), out.end(),
              [](const TripletRecord& a, const TripletRecord& b) { return a.id < b.id; });
    return out;
}

std::filesystem::path TripletDataset::resolve(const std::filesystem::path& rel) const {
    if (rel.is_absolute()) return rel;
    return root_ / rel;
}

LoadedTriplet TripletDataset::load_triplet(const TripletRecord& rec, ClampStats* stats) const {
    auto load_image = [&](const std::filesystem::path& rel) {
        Tensor t = read_tensor(resolve(rel));
        const std::size_t clamped = clamp_unit(t);
        if (stats && clamped > 0) {
            stats->values += clamped;
            stats->tensors += 1;
        }
        return t;
    };
    LoadedTriplet out;
    out.id = rec.id;
    out.x = load_image(rec.x);
    out.y_hat = load_image(rec.y_hat);
    out.y = load_image(rec.y);
    if (!out.y.same_dims(out.y_hat)) {
        throw ShapeError("record " + rec.id + ": y and y_hat dims differ");
    }
    if (rec.mask) {
        out.mask = load_image(*rec.mask);
        if (!out.mask->same_dims(out.y)) {
            throw ShapeError("record " + rec.id + ": mask dims differ from y");
        }
    }
    return out;
}

}  // namespace maskcal
