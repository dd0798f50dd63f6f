#include "dpgen/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dpgen/error.hpp"

namespace dpgen::io {
namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    // Skip a UTF-8 byte-order mark.
    if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        start = 3;
    }
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(std::move(line));
        start = end + 1;
    }
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    return lines;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t end = line.find(sep, start);
        if (end == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, end - start));
        start = end + 1;
    }
}

std::string position(const fs::path& path, std::size_t line, std::size_t column) {
    return path.string() + " row " + std::to_string(line) + " column " + std::to_string(column);
}

std::ofstream open_for_write(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

void close_checked(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

std::vector<std::string> read_id_lines(const fs::path& path) {
    auto lines = split_lines(read_file(path));
    for (const auto& id : lines) {
        if (id.empty()) {
            throw IoError(path.string() + ": empty identifier line");
        }
    }
    return lines;
}

json tensor_shape(const Tensor& t) {
    return json(t.shape());
}

}  // namespace

std::string format_double(double value) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc()) {
        throw IoError("cannot format number");
    }
    return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text, const std::string& where) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) {
        text.remove_suffix(1);
    }
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw IoError("malformed number '" + std::string(text) + "' at " + where);
    }
    return value;
}

void write_expression_csv(const fs::path& path, const ExpressionMatrix& x) {
    x.validate();
    std::string text = "spot_id";
    for (const auto& g : x.gene_ids) {
        text += ',';
        text += g;
    }
    text += '\n';
    for (std::size_t i = 0; i < x.spots(); ++i) {
        text += x.spot_ids[i];
        for (double v : x.values.row(i)) {
            text += ',';
            text += format_double(v);
        }
        text += '\n';
    }
    write_file_atomic(path, text);
}

ExpressionMatrix read_expression_csv(const fs::path& path) {
    const auto lines = split_lines(read_file(path));
    if (lines.empty()) {
        throw IoError(path.string() + ": empty file");
    }
    const auto header = split_fields(lines[0]);
    if (header.size() < 2 || header[0] != "spot_id") {
        throw IoError(path.string() + ": header must start with 'spot_id' followed by gene ids");
    }
    ExpressionMatrix x;
    for (std::size_t j = 1; j < header.size(); ++j) {
        x.gene_ids.emplace_back(header[j]);
    }
    const std::size_t genes = x.gene_ids.size();
    std::vector<double> values;
    values.reserve((lines.size() - 1) * genes);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_fields(lines[r]);
        if (fields.size() != genes + 1) {
            throw IoError(path.string() + " row " + std::to_string(r + 1) + ": expected " +
                          std::to_string(genes + 1) + " fields, got " + std::to_string(fields.size()));
        }
        x.spot_ids.emplace_back(fields[0]);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            values.push_back(parse_double(fields[j], position(path, r + 1, j + 1)));
        }
    }
    x.values = Tensor({x.spot_ids.size(), genes}, std::move(values));
    return x;
}

void write_matrix_market(const fs::path& path, const ExpressionMatrix& x, const fs::path& genes_path,
                         const fs::path& spots_path) {
    x.validate();
    std::size_t nnz = 0;
    for (double v : x.values.data()) {
        nnz += v != 0.0 ? 1 : 0;
    }
    std::string text = "%%MatrixMarket matrix coordinate real general\n";
    text += std::to_string(x.spots()) + " " + std::to_string(x.genes()) + " " + std::to_string(nnz) + "\n";
    for (std::size_t i = 0; i < x.spots(); ++i) {
        for (std::size_t j = 0; j < x.genes(); ++j) {
            const double v = x.values(i, j);
            if (v != 0.0) {
                text += std::to_string(i + 1) + " " + std::to_string(j + 1) + " " + format_double(v) + "\n";
            }
        }
    }
    write_file_atomic(path, text);
    std::string genes;
    for (const auto& g : x.gene_ids) {
        genes += g + "\n";
    }
    write_file_atomic(genes_path, genes);
    std::string spots;
    for (const auto& s : x.spot_ids) {
        spots += s + "\n";
    }
    write_file_atomic(spots_path, spots);
}

ExpressionMatrix read_matrix_market(const fs::path& path, const fs::path& genes_path, const fs::path& spots_path) {
    const auto lines = split_lines(read_file(path));
    if (lines.empty() || lines[0].rfind("%%MatrixMarket", 0) != 0) {
        throw IoError(path.string() + ": missing %%MatrixMarket banner");
    }
    std::istringstream banner(lines[0]);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate" || (field != "real" && field != "integer") ||
        symmetry != "general") {
        throw IoError(path.string() + ": only 'matrix coordinate real|integer general' is supported");
    }
    std::size_t line = 1;
    while (line < lines.size() && (lines[line].empty() || lines[line][0] == '%')) {
        ++line;
    }
    if (line >= lines.size()) {
        throw IoError(path.string() + ": missing size line");
    }
    std::istringstream size_line(lines[line]);
    std::size_t rows = 0, cols = 0, nnz = 0;
    if (!(size_line >> rows >> cols >> nnz)) {
        throw IoError(path.string() + " row " + std::to_string(line + 1) + ": malformed size line");
    }
    ExpressionMatrix x;
    x.gene_ids = read_id_lines(genes_path);
    x.spot_ids = read_id_lines(spots_path);
    if (x.spot_ids.size() != rows || x.gene_ids.size() != cols) {
        throw IoError(path.string() + ": matrix is " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " but sidecars list " + std::to_string(x.spot_ids.size()) + " spots and " +
                      std::to_string(x.gene_ids.size()) + " genes");
    }
    x.values = Tensor({rows, cols});
    std::size_t seen = 0;
    for (++line; line < lines.size(); ++line) {
        if (lines[line].empty() || lines[line][0] == '%') {
            continue;
        }
        std::istringstream entry(lines[line]);
        std::size_t i = 0, j = 0;
        std::string value;
        if (!(entry >> i >> j >> value) || i < 1 || i > rows || j < 1 || j > cols) {
            throw IoError(path.string() + " row " + std::to_string(line + 1) + ": malformed entry");
        }
        x.values(i - 1, j - 1) = parse_double(value, position(path, line + 1, 3));
        ++seen;
    }
    if (seen != nnz) {
        throw IoError(path.string() + ": expected " + std::to_string(nnz) + " entries, found " + std::to_string(seen));
    }
    return x;
}

ExpressionMatrix load_expression(const fs::path& path) {
    if (path.extension() == ".mtx") {
        const fs::path dir = path.parent_path();
        return read_matrix_market(path, dir / "genes.txt", dir / "spots.txt");
    }
    return read_expression_csv(path);
}

void write_coords_csv(const fs::path& path, const std::vector<std::string>& spot_ids, const Tensor& xy) {
    if (xy.rank() != 2 || xy.cols() != 2 || xy.rows() != spot_ids.size()) {
        throw ShapeError("coords: " + std::to_string(spot_ids.size()) + " ids for coordinates " + xy.shape_str());
    }
    std::string text = "spot_id,x,y\n";
    for (std::size_t i = 0; i < spot_ids.size(); ++i) {
        text += spot_ids[i] + "," + format_double(xy(i, 0)) + "," + format_double(xy(i, 1)) + "\n";
    }
    write_file_atomic(path, text);
}

SpatialCoords load_coords(const fs::path& path) {
    const auto lines = split_lines(read_file(path));
    if (lines.empty()) {
        throw IoError(path.string() + ": empty file");
    }
    const auto header = split_fields(lines[0]);
    if (header.size() != 3 || header[0] != "spot_id" || header[1] != "x" || header[2] != "y") {
        throw IoError(path.string() + ": header must be 'spot_id,x,y'");
    }
    SpatialCoords coords;
    std::vector<double> values;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_fields(lines[r]);
        if (fields.size() != 3) {
            throw IoError(path.string() + " row " + std::to_string(r + 1) + ": expected 3 fields");
        }
        coords.spot_ids.emplace_back(fields[0]);
        values.push_back(parse_double(fields[1], position(path, r + 1, 2)));
        values.push_back(parse_double(fields[2], position(path, r + 1, 3)));
    }
    coords.xy = Tensor({coords.spot_ids.size(), 2}, std::move(values));
    return coords;
}

Tensor align_coords(const SpatialCoords& coords, const std::vector<std::string>& spot_ids) {
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < coords.spot_ids.size(); ++i) {
        if (!row_of.emplace(coords.spot_ids[i], i).second) {
            throw IoError("coords: duplicate spot id '" + coords.spot_ids[i] + "'");
        }
    }
    std::vector<std::string> missing;
    std::vector<std::size_t> order;
    order.reserve(spot_ids.size());
    for (const auto& id : spot_ids) {
        const auto it = row_of.find(id);
        if (it == row_of.end()) {
            missing.push_back(id);
        } else {
            order.push_back(it->second);
        }
    }
    const std::unordered_set<std::string> wanted(spot_ids.begin(), spot_ids.end());
    std::vector<std::string> extra;
    for (const auto& id : coords.spot_ids) {
        if (!wanted.contains(id)) {
            extra.push_back(id);
        }
    }
    if (!missing.empty() || !extra.empty()) {
        auto list = [](const std::vector<std::string>& ids) {
            std::string s;
            for (std::size_t i = 0; i < ids.size() && i < 20; ++i) {
                s += (i ? " " : "") + ids[i];
            }
            if (ids.size() > 20) {
                s += " ...";
            }
            return s;
        };
        std::string msg = "coords do not match expression spots;";
        if (!missing.empty()) {
            msg += " missing: " + list(missing) + ";";
        }
        if (!extra.empty()) {
            msg += " extra: " + list(extra) + ";";
        }
        throw IoError(msg);
    }
    return coords.xy.gather_rows(order);
}

void write_binary(const fs::path& path, std::string_view magic, const json& header, std::span<const double> payload) {
    if (magic.size() != 16) {
        throw IoError("binary magic must be 16 bytes");
    }
    const std::string head = header.dump();
    std::string bytes;
    bytes.reserve(24 + head.size() + payload.size() * 8);
    bytes.append(magic);
    const std::uint64_t length = head.size();
    bytes.append(reinterpret_cast<const char*>(&length), sizeof length);
    bytes.append(head);
    bytes.append(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(double));
    write_file_atomic(path, bytes);
}

BinaryBlob read_binary(const fs::path& path, std::string_view magic) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 24 || std::string_view(bytes).substr(0, 16) != magic) {
        throw IoError(path.string() + ": not a " + std::string(magic) + " file");
    }
    std::uint64_t length = 0;
    std::memcpy(&length, bytes.data() + 16, sizeof length);
    if (length > bytes.size() - 24) {
        throw IoError(path.string() + ": truncated header");
    }
    BinaryBlob blob;
    try {
        blob.header = json::parse(bytes.substr(24, length));
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": bad header JSON: " + e.what());
    }
    const std::size_t rest = bytes.size() - 24 - length;
    if (rest % sizeof(double) != 0) {
        throw IoError(path.string() + ": payload is not a whole number of f64 values");
    }
    blob.payload.resize(rest / sizeof(double));
    std::memcpy(blob.payload.data(), bytes.data() + 24 + length, rest);
    return blob;
}

void save_features(const fs::path& path, const FeatureMatrix& features) {
    if (features.values.rank() != 2 || features.values.rows() != features.spot_ids.size()) {
        throw ShapeError("features: " + std::to_string(features.spot_ids.size()) + " ids for " +
                         features.values.shape_str());
    }
    const json header{{"dtype", "f64"},
                      {"order", "row-major"},
                      {"rows", features.values.rows()},
                      {"cols", features.values.cols()},
                      {"spot_ids", features.spot_ids}};
    write_binary(path, features_magic, header, features.values.data());
}

FeatureMatrix load_features(const fs::path& path) {
    auto blob = read_binary(path, features_magic);
    try {
        const auto rows = blob.header.at("rows").get<std::size_t>();
        const auto cols = blob.header.at("cols").get<std::size_t>();
        if (blob.header.at("dtype") != "f64" || blob.payload.size() != rows * cols) {
            throw IoError(path.string() + ": header does not match payload");
        }
        FeatureMatrix f;
        f.spot_ids = blob.header.at("spot_ids").get<std::vector<std::string>>();
        if (f.spot_ids.size() != rows) {
            throw IoError(path.string() + ": spot id count does not match rows");
        }
        f.values = Tensor({rows, cols}, std::move(blob.payload));
        return f;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": bad header: " + e.what());
    }
}

void save_preprocess_model(const fs::path& path, const PreprocessModel& model) {
    const PcaModel& pca = model.pca;
    const json header{{"dtype", "f64"},
                      {"scale", model.scale},
                      {"gene_ids", model.gene_ids},
                      {"hvg_indices", model.hvg_indices},
                      {"k", pca.k()},
                      {"input_dim", pca.input_dim()},
                      {"rank_deficient", pca.rank_deficient},
                      {"layout", {"mean[input_dim]", "components[k,input_dim]", "explained_variance[k]"}}};
    std::vector<double> payload(pca.mean);
    payload.insert(payload.end(), pca.components.data().begin(), pca.components.data().end());
    payload.insert(payload.end(), pca.explained_variance.begin(), pca.explained_variance.end());
    write_binary(path, pca_model_magic, header, payload);
}

PreprocessModel load_preprocess_model(const fs::path& path) {
    const auto blob = read_binary(path, pca_model_magic);
    try {
        PreprocessModel model;
        model.scale = blob.header.at("scale").get<double>();
        model.gene_ids = blob.header.at("gene_ids").get<std::vector<std::string>>();
        model.hvg_indices = blob.header.at("hvg_indices").get<std::vector<std::size_t>>();
        const auto k = blob.header.at("k").get<std::size_t>();
        const auto d = blob.header.at("input_dim").get<std::size_t>();
        if (blob.payload.size() != d + k * d + k || model.hvg_indices.size() != d) {
            throw IoError(path.string() + ": header does not match payload");
        }
        for (std::size_t idx : model.hvg_indices) {
            if (idx >= model.gene_ids.size()) {
                throw IoError(path.string() + ": gene index out of range");
            }
        }
        auto it = blob.payload.begin();
        model.pca.mean.assign(it, it + static_cast<std::ptrdiff_t>(d));
        it += static_cast<std::ptrdiff_t>(d);
        model.pca.components = Tensor({k, d}, std::vector<double>(it, it + static_cast<std::ptrdiff_t>(k * d)));
        it += static_cast<std::ptrdiff_t>(k * d);
        model.pca.explained_variance.assign(it, blob.payload.end());
        model.pca.rank_deficient = blob.header.value("rank_deficient", false);
        return model;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": bad header: " + e.what());
    }
}

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
    const ModelParams& p = checkpoint.params;
    json params = json::array();
    std::vector<double> payload;
    const auto& names = ModelParams::names();
    const auto tensors = p.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        params.push_back({{"name", names[i]}, {"shape", tensor_shape(*tensors[i])}, {"offset", payload.size()}});
        payload.insert(payload.end(), tensors[i]->data().begin(), tensors[i]->data().end());
    }
    json header{{"dtype", "f64"},
                {"input_dim", p.dims.input_dim},
                {"hidden_dim", p.dims.hidden_dim},
                {"latent_dim", p.dims.latent_dim},
                {"seed", checkpoint.config.seed},
                {"config", to_json(checkpoint.config)},
                {"parameters", params}};
    if (!checkpoint.extra.is_null()) {
        header["extra"] = checkpoint.extra;
    }
    write_binary(path, checkpoint_magic, header, payload);
}

Checkpoint load_checkpoint(const fs::path& path) {
    const auto blob = read_binary(path, checkpoint_magic);
    try {
        Checkpoint ck;
        const ModelDims dims{blob.header.at("input_dim").get<std::size_t>(),
                             blob.header.at("hidden_dim").get<std::size_t>(),
                             blob.header.at("latent_dim").get<std::size_t>()};
        ck.params = ModelParams::zeros(dims);
        merge_json(blob.header.at("config"), ck.config);
        ck.extra = blob.header.value("extra", json());
        const auto& entries = blob.header.at("parameters");
        const auto& names = ModelParams::names();
        auto tensors = ck.params.tensors();
        if (entries.size() != names.size()) {
            throw IoError(path.string() + ": expected " + std::to_string(names.size()) + " parameters");
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            const auto& e = entries[i];
            Tensor& t = *tensors[i];
            const auto offset = e.at("offset").get<std::size_t>();
            if (e.at("name") != names[i] || e.at("shape").get<Tensor::Shape>() != t.shape() ||
                offset + t.size() > blob.payload.size()) {
                throw IoError(path.string() + ": parameter '" + names[i] + "' does not match the model dims");
            }
            std::copy_n(blob.payload.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.data().begin());
        }
        return ck;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": bad header: " + e.what());
    }
}

json to_json(const TrainConfig& c) {
    return json{{"latent_dim", c.latent_dim}, {"hidden_dim", c.hidden_dim}, {"pca_k", c.pca_k},
                {"beta", c.beta},             {"alpha", c.alpha},           {"lr", c.lr},
                {"batch_size", c.batch_size}, {"max_epochs", c.max_epochs}, {"patience", c.patience},
                {"min_improvement", c.min_improvement},
                {"mask_k", c.mask_k},         {"seed", c.seed}};
}

void merge_json(const json& j, TrainConfig& c) {
    try {
        c.latent_dim = j.value("latent_dim", c.latent_dim);
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.pca_k = j.value("pca_k", c.pca_k);
        c.beta = j.value("beta", c.beta);
        c.alpha = j.value("alpha", c.alpha);
        c.lr = j.value("lr", c.lr);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.patience = j.value("patience", c.patience);
        c.min_improvement = j.value("min_improvement", c.min_improvement);
        c.mask_k = j.value("mask_k", c.mask_k);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
}

json to_json(const SynthConfig& c) {
    return json{{"grid_side", c.grid_side}, {"n_genes", c.n_genes},   {"n_patterns", c.n_patterns},
                {"smoothness", c.smoothness}, {"noise_sd", c.noise_sd}, {"count_scale", c.count_scale},
                {"seed", c.seed}};
}

void merge_json(const json& j, SynthConfig& c) {
    try {
        c.grid_side = j.value("grid_side", c.grid_side);
        c.n_genes = j.value("n_genes", c.n_genes);
        c.n_patterns = j.value("n_patterns", c.n_patterns);
        c.smoothness = j.value("smoothness", c.smoothness);
        c.noise_sd = j.value("noise_sd", c.noise_sd);
        c.count_scale = j.value("count_scale", c.count_scale);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
}

namespace {

// JSON has no NaN/inf; they become null.
json number_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

json numbers_or_null(const std::vector<double>& values) {
    json out = json::array();
    for (double v : values) {
        out.push_back(number_or_null(v));
    }
    return out;
}

}  // namespace

json to_json(const EvalMetrics& m) {
    const auto& a = m.autocorrelation;
    return json{{"mse", m.mse},
                {"k", m.k},
                {"morans_i", {{"mean", a.morans_i_mean}, {"per_dim", numbers_or_null(a.morans_i)}}},
                {"gearys_c", {{"mean", a.gearys_c_mean}, {"per_dim", numbers_or_null(a.gearys_c)}}},
                {"excluded_dims", a.excluded_dims},
                {"latent_aggregation", "mean over latent dimensions"}};
}

json to_json(const DistortionReport& r) {
    return json{{"l_dis", r.l_dis},
                {"lambda", r.lambda},
                {"coverage", r.coverage},
                {"lower_bound_fraction", r.lower_bound_fraction},
                {"lower_bound_ok", r.lower_bound_ok},
                {"l_hat", number_or_null(r.l_hat)},
                {"l_bound", number_or_null(r.l_bound)},
                {"l_bound_derivation_form", number_or_null(r.l_bound_derivation_form)},
                {"bound_holds", r.bound_holds},
                {"m1", r.m1},
                {"m2", r.m2},
                {"epsilon", r.epsilon},
                {"delta", r.delta},
                {"draws", r.draws},
                {"pairs", r.pairs}};
}

void write_history_csv(const fs::path& path, const TrainHistory& history) {
    std::string text = "epoch,loss,recon,kl,distortion,lambda,seconds\n";
    for (const auto& e : history.epochs) {
        text += std::to_string(e.epoch) + "," + format_double(e.loss) + "," + format_double(e.recon) + "," +
                format_double(e.kl) + "," + format_double(e.distortion) + "," + format_double(e.lambda) + "," +
                format_double(e.seconds) + "\n";
    }
    write_file_atomic(path, text);
}

void write_latent_csv(const fs::path& path, const std::vector<std::string>& spot_ids, const Tensor& latent) {
    if (latent.rank() != 2 || latent.rows() != spot_ids.size()) {
        throw ShapeError("latent: " + std::to_string(spot_ids.size()) + " ids for " + latent.shape_str());
    }
    std::string text = "spot_id";
    for (std::size_t d = 0; d < latent.cols(); ++d) {
        text += ",z" + std::to_string(d);
    }
    text += '\n';
    for (std::size_t i = 0; i < spot_ids.size(); ++i) {
        text += spot_ids[i];
        for (double v : latent.row(i)) {
            text += "," + format_double(v);
        }
        text += '\n';
    }
    write_file_atomic(path, text);
}

void write_edges_csv(const fs::path& path, const MaskGraph& graph) {
    std::string text = "i,j\n";
    for (auto [i, j] : graph.edges()) {
        text += std::to_string(i) + "," + std::to_string(j) + "\n";
    }
    write_file_atomic(path, text);
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        auto out = open_for_write(tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        close_checked(out, tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
    }
}

void write_json(const fs::path& path, const json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

std::string sha256_file(const fs::path& path) {
    const std::string bytes = read_file(path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
        throw IoError("sha256 failed for '" + path.string() + "'");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

}  // namespace dpgen::io
