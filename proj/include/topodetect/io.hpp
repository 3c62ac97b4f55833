#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "topodetect/attack.hpp"
#include "topodetect/detection.hpp"
#include "topodetect/idx.hpp"
#include "topodetect/induced_graph.hpp"
#include "topodetect/model_io.hpp"
#include "topodetect/persistence.hpp"

namespace topodetect {

struct FileFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Parameters echoed into every output file header so a run can be replayed.
struct RunConfig {
    double rho = 0.99;
    double lambda = 0.1;
    double kappa = 0.0;
    double pi = 0.9;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> extra; // sample sizes, paths, ...

    std::string to_line() const {
        std::ostringstream out;
        out << "rho=" << format_double(rho) << " lambda=" << format_double(lambda)
            << " kappa=" << format_double(kappa) << " pi=" << format_double(pi)
            << " seed=" << seed;
        for (const auto& [k, v] : extra) out << " " << k << "=" << v;
        return out.str();
    }
};

struct InputStamp {
    std::string name;
    std::uint64_t checksum = 0;
};

namespace detail {

inline void write_text_header(std::ostream& out, const char* kind, const RunConfig& config,
                              const std::vector<InputStamp>& inputs) {
    out << "# topodetect " << kind << " v1\n";
    out << "# config " << config.to_line() << "\n";
    for (const InputStamp& in : inputs) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(in.checksum));
        out << "# input " << in.name << " checksum=" << buf << "\n";
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileFormatError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

inline bool is_comment(const std::string& line) {
    return line.empty() || line[0] == '#';
}

} // namespace detail

inline std::uint64_t file_checksum(const std::string& path) {
    const std::vector<unsigned char> bytes = detail::read_file_bytes(path);
    return fnv1a(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Graph dump: one edge per line `src dst weight layer`
// ---------------------------------------------------------------------------

inline void write_graph_dump(const std::string& path, const InducedGraph& graph,
                             const RunConfig& config, const std::vector<InputStamp>& inputs) {
    std::ofstream out = detail::open_out(path);
    detail::write_text_header(out, "graph", config, inputs);
    out << "# omega " << format_double(graph.omega) << " min_weight "
        << format_double(graph.min_weight) << "\n";
    for (const InducedEdge& e : graph.edges)
        out << e.src << " " << e.dst << " " << format_double(e.weight) << " " << e.layer
            << "\n";
}

inline InducedGraph read_graph_dump(const std::string& path) {
    InducedGraph graph;
    bool have_extrema = false;
    for (const std::string& line : detail::read_lines(path)) {
        if (line.rfind("# omega ", 0) == 0) {
            std::istringstream ss(line.substr(2));
            std::string key;
            ss >> key >> graph.omega >> key >> graph.min_weight;
            have_extrema = true;
            continue;
        }
        if (detail::is_comment(line)) continue;
        InducedEdge e;
        std::istringstream ss(line);
        if (!(ss >> e.src >> e.dst >> e.weight >> e.layer))
            throw FileFormatError("graph dump: malformed edge line: " + line);
        graph.edges.push_back(e);
    }
    if (graph.edges.empty()) throw FileFormatError("graph dump: no edges in " + path);
    graph.omega = graph.edges.front().weight;
    graph.min_weight = graph.edges.front().weight;
    for (const InducedEdge& e : graph.edges) {
        graph.vertices.push_back(e.src);
        graph.vertices.push_back(e.dst);
        graph.omega = std::max(graph.omega, e.weight);
        graph.min_weight = std::min(graph.min_weight, e.weight);
    }
    std::sort(graph.vertices.begin(), graph.vertices.end());
    graph.vertices.erase(std::unique(graph.vertices.begin(), graph.vertices.end()),
                         graph.vertices.end());
    (void)have_extrema;
    return graph;
}

// ---------------------------------------------------------------------------
// Persistence diagram CSV: dim,birth,death,generator_id
// ---------------------------------------------------------------------------

inline void write_diagram_csv(const std::string& path, const PersistenceDiagram& diagram,
                              const RunConfig& config, const std::vector<InputStamp>& inputs) {
    std::ofstream out = detail::open_out(path);
    detail::write_text_header(out, "diagram", config, inputs);
    out << "# omega " << format_double(diagram.omega) << " min_weight "
        << format_double(diagram.min_weight) << "\n";
    out << "dim,birth,death,generator_id\n";
    for (const DiagramPoint& p : diagram.points)
        out << p.dimension << "," << format_double(p.birth) << "," << format_double(p.death)
            << "," << p.generator_id << "\n";
}

inline PersistenceDiagram read_diagram_csv(const std::string& path) {
    PersistenceDiagram diagram;
    bool saw_column_header = false;
    for (const std::string& line : detail::read_lines(path)) {
        if (line.rfind("# omega ", 0) == 0) {
            std::istringstream ss(line.substr(2));
            std::string key;
            ss >> key >> diagram.omega >> key >> diagram.min_weight;
            continue;
        }
        if (detail::is_comment(line)) continue;
        if (!saw_column_header) {
            if (line != "dim,birth,death,generator_id")
                throw FileFormatError("diagram csv: unexpected column header: " + line);
            saw_column_header = true;
            continue;
        }
        DiagramPoint p;
        std::istringstream ss(line);
        char comma;
        if (!(ss >> p.dimension >> comma >> p.birth >> comma >> p.death >> comma >>
              p.generator_id))
            throw FileFormatError("diagram csv: malformed row: " + line);
        diagram.points.push_back(p);
    }
    if (!saw_column_header) throw FileFormatError("diagram csv: missing column header");
    return diagram;
}

// ---------------------------------------------------------------------------
// Generator subgraphs, one block per dim-0 point, edges in graph-dump format
// ---------------------------------------------------------------------------

inline void write_generators(const std::string& path,
                             const std::vector<GeneratorSubgraph>& generators,
                             const RunConfig& config, const std::vector<InputStamp>& inputs) {
    std::ofstream out = detail::open_out(path);
    detail::write_text_header(out, "generators", config, inputs);
    for (std::size_t i = 0; i < generators.size(); ++i) {
        const GeneratorSubgraph& g = generators[i];
        out << "generator " << i << " birth " << format_double(g.birth) << " death "
            << format_double(g.death) << "\n";
        for (VertexId v : g.vertices) out << "v " << v << "\n";
        for (const InducedEdge& e : g.edges)
            out << "e " << e.src << " " << e.dst << " " << format_double(e.weight) << " "
                << e.layer << "\n";
    }
}

// ---------------------------------------------------------------------------
// Class signatures: per class, lines `vertex_id count rank`
// ---------------------------------------------------------------------------

inline void write_signatures(const std::string& path,
                             const std::vector<ClassSignature>& signatures,
                             const RunConfig& config, const std::vector<InputStamp>& inputs) {
    std::ofstream out = detail::open_out(path);
    detail::write_text_header(out, "signatures", config, inputs);
    for (const ClassSignature& sig : signatures) {
        out << "class " << sig.class_index << " size " << sig.entries.size() << "\n";
        for (const SignatureEntry& e : sig.entries)
            out << e.vertex << " " << e.count << " " << e.rank << "\n";
    }
}

inline std::vector<ClassSignature> read_signatures(const std::string& path) {
    std::vector<ClassSignature> signatures;
    ClassSignature* cur = nullptr;
    std::size_t expected = 0;
    for (const std::string& line : detail::read_lines(path)) {
        if (detail::is_comment(line)) continue;
        if (line.rfind("class ", 0) == 0) {
            if (cur && cur->entries.size() != expected)
                throw FileFormatError("signatures: truncated class block");
            std::istringstream ss(line);
            std::string word;
            std::size_t index = 0;
            ss >> word >> index >> word >> expected;
            signatures.push_back({});
            cur = &signatures.back();
            cur->class_index = index;
            continue;
        }
        if (!cur) throw FileFormatError("signatures: entry before class line");
        SignatureEntry e;
        std::istringstream ss(line);
        if (!(ss >> e.vertex >> e.count >> e.rank))
            throw FileFormatError("signatures: malformed entry: " + line);
        cur->entries.push_back(e);
    }
    if (cur && cur->entries.size() != expected)
        throw FileFormatError("signatures: truncated class block");
    if (signatures.empty()) throw FileFormatError("signatures: empty file " + path);
    return signatures;
}

// ---------------------------------------------------------------------------
// Detector statistics: named scalar fields
// ---------------------------------------------------------------------------

inline void write_stats(const std::string& path, const DetectorStats& stats,
                        const RunConfig& config, const std::vector<InputStamp>& inputs) {
    std::ofstream out = detail::open_out(path);
    detail::write_text_header(out, "stats", config, inputs);
    out << "mu_match " << format_double(stats.mu_match) << "\n";
    out << "sigma_match " << format_double(stats.sigma_match) << "\n";
    out << "median_edges " << format_double(stats.median_edges) << "\n";
    out << "percentile_edges " << format_double(stats.percentile_edges) << "\n";
    out << "pi " << format_double(stats.pi) << "\n";
    out << "mu_weight " << format_double(stats.mu_weight) << "\n";
    out << "sigma_weight " << format_double(stats.sigma_weight) << "\n";
}

inline DetectorStats read_stats(const std::string& path) {
    DetectorStats stats;
    for (const std::string& line : detail::read_lines(path)) {
        if (detail::is_comment(line)) continue;
        std::istringstream ss(line);
        std::string key;
        double value = 0.0;
        if (!(ss >> key >> value)) throw FileFormatError("stats: malformed line: " + line);
        if (key == "mu_match") stats.mu_match = value;
        else if (key == "sigma_match") stats.sigma_match = value;
        else if (key == "median_edges") stats.median_edges = value;
        else if (key == "percentile_edges") stats.percentile_edges = value;
        else if (key == "pi") stats.pi = value;
        else if (key == "mu_weight") stats.mu_weight = value;
        else if (key == "sigma_weight") stats.sigma_weight = value;
        else throw FileFormatError("stats: unknown field " + key);
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Verdicts CSV: input_id,is_adversarial_truth,method,flagged,score
// ---------------------------------------------------------------------------

struct VerdictRow {
    std::string input_id;
    bool is_adversarial_truth = false;
    std::string method;
    bool flagged = false;
    double score = 0.0;
};

inline void write_verdicts(const std::string& path, const std::vector<VerdictRow>& rows,
                           const RunConfig& config, const std::vector<InputStamp>& inputs) {
    std::ofstream out = detail::open_out(path);
    detail::write_text_header(out, "verdicts", config, inputs);
    out << "input_id,is_adversarial_truth,method,flagged,score\n";
    for (const VerdictRow& r : rows)
        out << r.input_id << "," << (r.is_adversarial_truth ? 1 : 0) << "," << r.method << ","
            << (r.flagged ? 1 : 0) << "," << format_double(r.score) << "\n";
}

inline std::vector<VerdictRow> read_verdicts(const std::string& path) {
    std::vector<VerdictRow> rows;
    bool saw_column_header = false;
    for (const std::string& line : detail::read_lines(path)) {
        if (detail::is_comment(line)) continue;
        if (!saw_column_header) {
            if (line != "input_id,is_adversarial_truth,method,flagged,score")
                throw FileFormatError("verdicts: unexpected column header: " + line);
            saw_column_header = true;
            continue;
        }
        VerdictRow r;
        std::istringstream ss(line);
        std::string field;
        if (!std::getline(ss, r.input_id, ',')) continue;
        if (!std::getline(ss, field, ',')) throw FileFormatError("verdicts: bad row: " + line);
        r.is_adversarial_truth = field == "1";
        if (!std::getline(ss, r.method, ',')) throw FileFormatError("verdicts: bad row: " + line);
        if (!std::getline(ss, field, ',')) throw FileFormatError("verdicts: bad row: " + line);
        r.flagged = field == "1";
        if (!std::getline(ss, field)) throw FileFormatError("verdicts: bad row: " + line);
        r.score = std::strtod(field.c_str(), nullptr);
        rows.push_back(std::move(r));
    }
    if (!saw_column_header) throw FileFormatError("verdicts: missing column header");
    return rows;
}

// ---------------------------------------------------------------------------
// Metrics table mirroring the evaluation tables: one row per method
// ---------------------------------------------------------------------------

struct MetricsRow {
    std::string method;
    double kappa = 0.0;
    double lambda = 0.0;
    double pi = 0.0;
    DetectionMetrics metrics;
};

inline void write_metrics(const std::string& path, const std::vector<MetricsRow>& rows,
                          const RunConfig& config, const std::vector<InputStamp>& inputs) {
    std::ofstream out = detail::open_out(path);
    detail::write_text_header(out, "metrics", config, inputs);
    out << "method,kappa,lambda,pi,accuracy,false_positives,false_negatives,f1\n";
    for (const MetricsRow& r : rows)
        out << r.method << "," << format_double(r.kappa) << "," << format_double(r.lambda)
            << "," << format_double(r.pi) << "," << format_double(r.metrics.accuracy) << ","
            << r.metrics.false_positives << "," << r.metrics.false_negatives << ","
            << format_double(r.metrics.f1) << "\n";
}

// ---------------------------------------------------------------------------
// Adversary set: binary records with the perturbed image pixels
// ---------------------------------------------------------------------------

namespace detail {

constexpr char kAdversaryMagic[4] = {'T', 'D', 'A', 'S'};
constexpr std::uint32_t kAdversaryVersion = 1;

} // namespace detail

struct AdversarySetFile {
    double kappa = 0.0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::string config_line;
    std::vector<AdversarySetEntry> entries;
    std::size_t attempted = 0;
    std::size_t failed = 0;
};

inline void write_adversary_set(const std::string& path, const AdversarySetFile& file) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_adversary_set: cannot open " + path);
    out.write(detail::kAdversaryMagic, 4);
    detail::put_u32(out, detail::kAdversaryVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(file.config_line.size()));
    out.write(file.config_line.data(),
              static_cast<std::streamsize>(file.config_line.size()));
    detail::put_f64(out, file.kappa);
    detail::put_u64(out, file.height);
    detail::put_u64(out, file.width);
    detail::put_u64(out, file.attempted);
    detail::put_u64(out, file.failed);
    detail::put_u64(out, file.entries.size());
    for (const AdversarySetEntry& entry : file.entries) {
        detail::put_u64(out, entry.source_index);
        detail::put_u64(out, entry.example.target);
        detail::put_f64(out, entry.example.kappa);
        detail::put_f64(out, entry.example.distortion);
        out.put(entry.example.success ? 1 : 0);
        detail::put_u64(out, entry.example.predicted_class);
        detail::put_u64(out, entry.example.perturbed.size());
        for (double v : entry.example.perturbed.data) detail::put_f64(out, v);
    }
}

inline AdversarySetFile read_adversary_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileFormatError("read_adversary_set: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, detail::kAdversaryMagic, 4) != 0)
        throw FileFormatError("adversary set: bad magic in " + path);
    const std::uint32_t version = detail::take_u32(in);
    if (version != detail::kAdversaryVersion)
        throw FileFormatError("adversary set: unsupported version");
    AdversarySetFile file;
    const std::uint32_t config_len = detail::take_u32(in);
    file.config_line.resize(config_len);
    if (config_len && !in.read(file.config_line.data(), config_len))
        throw FileFormatError("adversary set: truncated config");
    file.kappa = detail::take_f64(in);
    file.height = static_cast<std::size_t>(detail::take_u64(in));
    file.width = static_cast<std::size_t>(detail::take_u64(in));
    file.attempted = static_cast<std::size_t>(detail::take_u64(in));
    file.failed = static_cast<std::size_t>(detail::take_u64(in));
    const std::uint64_t count = detail::take_u64(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        AdversarySetEntry entry;
        entry.source_index = static_cast<std::size_t>(detail::take_u64(in));
        entry.example.target = static_cast<std::size_t>(detail::take_u64(in));
        entry.example.kappa = detail::take_f64(in);
        entry.example.distortion = detail::take_f64(in);
        const int success = in.get();
        if (success == EOF) throw FileFormatError("adversary set: truncated record");
        entry.example.success = success != 0;
        entry.example.predicted_class = static_cast<std::size_t>(detail::take_u64(in));
        const std::uint64_t pixels = detail::take_u64(in);
        if (pixels != file.height * file.width)
            throw FileFormatError("adversary set: pixel count mismatch");
        entry.example.perturbed = Tensor({file.height, file.width});
        for (double& v : entry.example.perturbed.data) v = detail::take_f64(in);
        file.entries.push_back(std::move(entry));
    }
    return file;
}

// ---------------------------------------------------------------------------
// Interpolation curve CSV: t,distance
// ---------------------------------------------------------------------------

inline void write_curve_csv(const std::string& path,
                            const std::vector<std::pair<double, double>>& curve,
                            const RunConfig& config, const std::vector<InputStamp>& inputs) {
    std::ofstream out = detail::open_out(path);
    detail::write_text_header(out, "interpolation", config, inputs);
    out << "t,distance\n";
    for (const auto& [t, d] : curve)
        out << format_double(t) << "," << format_double(d) << "\n";
}

} // namespace topodetect
