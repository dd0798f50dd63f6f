#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dpgen/distortion.hpp"
#include "dpgen/model.hpp"
#include "dpgen/preprocess.hpp"
#include "dpgen/synthdata.hpp"
#include "dpgen/trainer.hpp"

namespace dpgen::io {

namespace fs = std::filesystem;
using nlohmann::json;

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
// Whole-string decimal parse; throws IoError naming `where` on failure.
double parse_double(std::string_view text, const std::string& where);

// Expression CSV: header "spot_id,<gene ids...>", then one row per spot.
void write_expression_csv(const fs::path& path, const ExpressionMatrix& x);
ExpressionMatrix read_expression_csv(const fs::path& path);

// MatrixMarket "coordinate real general", spots as rows, 1-based indices.
// Identifiers live in sidecar files with one id per line.
void write_matrix_market(const fs::path& path, const ExpressionMatrix& x, const fs::path& genes_path,
                         const fs::path& spots_path);
ExpressionMatrix read_matrix_market(const fs::path& path, const fs::path& genes_path, const fs::path& spots_path);

// Dispatches on extension: ".mtx" reads MatrixMarket with genes.txt and
// spots.txt next to it, anything else reads CSV.
ExpressionMatrix load_expression(const fs::path& path);

struct SpatialCoords {
    std::vector<std::string> spot_ids;
    Tensor xy;  // [spots, 2]
};

// Coordinates CSV: header "spot_id,x,y".
void write_coords_csv(const fs::path& path, const std::vector<std::string>& spot_ids, const Tensor& xy);
SpatialCoords load_coords(const fs::path& path);

// Rows of `coords` reordered to `spot_ids`. Missing or extra ids throw IoError listing them.
Tensor align_coords(const SpatialCoords& coords, const std::vector<std::string>& spot_ids);

// Binary container: 16-byte magic, u64 little-endian header length, JSON
// header, then little-endian f64 payload.
struct BinaryBlob {
    json header;
    std::vector<double> payload;
};
void write_binary(const fs::path& path, std::string_view magic, const json& header, std::span<const double> payload);
BinaryBlob read_binary(const fs::path& path, std::string_view magic);

inline constexpr std::string_view features_magic = "DPGEN_FEATURES01";
inline constexpr std::string_view pca_model_magic = "DPGEN_PCAMODEL01";
inline constexpr std::string_view checkpoint_magic = "DPGEN_CHECKPT_01";

struct FeatureMatrix {
    Tensor values;  // [spots, dims]
    std::vector<std::string> spot_ids;
};
void save_features(const fs::path& path, const FeatureMatrix& features);
FeatureMatrix load_features(const fs::path& path);

void save_preprocess_model(const fs::path& path, const PreprocessModel& model);
PreprocessModel load_preprocess_model(const fs::path& path);

struct Checkpoint {
    ModelParams params;
    TrainConfig config;
    json extra;  // free-form metadata kept in the header
};
void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const fs::path& path);

json to_json(const TrainConfig& config);
// Missing keys keep the values already in `config`.
void merge_json(const json& j, TrainConfig& config);
json to_json(const SynthConfig& config);
void merge_json(const json& j, SynthConfig& config);

json to_json(const EvalMetrics& metrics);
json to_json(const DistortionReport& report);

void write_history_csv(const fs::path& path, const TrainHistory& history);
// Latent means per spot: "spot_id,z0,z1,...".
void write_latent_csv(const fs::path& path, const std::vector<std::string>& spot_ids, const Tensor& latent);
void write_edges_csv(const fs::path& path, const MaskGraph& graph);

json read_json(const fs::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const fs::path& path, std::string_view contents);
void write_json(const fs::path& path, const json& j);

// Lowercase hex SHA-256 of the file's bytes.
std::string sha256_file(const fs::path& path);

}  // namespace dpgen::io
