#include <lpass/artifacts.hpp>
#include <lpass/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace lpass {

std::string format_number(double v)
{
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw Error("cannot format number");
    return std::string(buf, end);
}

namespace {

std::string percent(double fraction)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
    // Avoid "-0.0" so equal magnitudes print identically.
    if (std::string_view(buf) == "-0.0") return "0.0";
    return buf;
}

double parse_double(const std::string& s, std::string_view what)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("invalid number '" + s + "' in " + std::string(what));
    return v;
}

std::uint64_t parse_uint(const std::string& s, std::string_view what)
{
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("invalid integer '" + s + "' in " + std::string(what));
    return v;
}

std::string quote_field(const std::string& f)
{
    if (f.find_first_of(",\"\n\r") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) {
        if (c == '"') q.push_back('"');
        q.push_back(c);
    }
    q.push_back('"');
    return q;
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back().push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back().push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back().push_back(c);
        }
    }
    if (quoted) throw Error("unterminated quoted CSV field");
    return fields;
}

std::string join(const std::vector<std::string>& items, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

} // namespace

std::size_t CsvTable::column(std::string_view name) const
{
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw Error("missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

std::string CsvTable::header_value(std::string_view key) const
{
    for (const auto& [k, v] : header) {
        if (k == key) return v;
    }
    return {};
}

void write_csv(std::ostream& out, const CsvTable& table)
{
    for (const auto& [k, v] : table.header) out << "# " << k << ": " << v << '\n';
    std::vector<std::string> quoted;
    for (const auto& c : table.columns) quoted.push_back(quote_field(c));
    out << join(quoted, ",") << '\n';
    for (const auto& row : table.rows) {
        quoted.clear();
        for (const auto& f : row) quoted.push_back(quote_field(f));
        out << join(quoted, ",") << '\n';
    }
}

CsvTable read_csv(std::istream& in)
{
    CsvTable t;
    std::string line;
    std::string physical;
    bool have_columns = false;
    while (std::getline(in, physical)) {
        // A quoted field may span lines; keep reading until its quote closes.
        line = std::move(physical);
        const bool comment = !have_columns && line.starts_with("#");
        while (!comment && std::count(line.begin(), line.end(), '"') % 2 == 1) {
            if (!std::getline(in, physical)) throw Error("unterminated quoted CSV field");
            line += '\n';
            line += physical;
        }
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_columns && line.starts_with("#")) {
            const auto body = line.substr(line.starts_with("# ") ? 2 : 1);
            const auto colon = body.find(": ");
            if (colon == std::string::npos) {
                t.header.emplace_back(body, "");
            } else {
                t.header.emplace_back(body.substr(0, colon), body.substr(colon + 2));
            }
            continue;
        }
        auto fields = split_csv_line(line);
        if (!have_columns) {
            t.columns = std::move(fields);
            have_columns = true;
            continue;
        }
        if (fields.size() != t.columns.size()) {
            throw Error("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(t.columns.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    if (!have_columns) throw Error("CSV file has no header row");
    return t;
}

CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return read_csv(in);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << contents;
    out.close();
    if (!out) throw Error("I/O failure writing " + path.string());
}

CsvTable metrics_table(const std::vector<MetricsRow>& rows, ArtifactHeader header)
{
    CsvTable t{std::move(header), {"id", "cc", "hd", "n1", "n2", "N1", "N2"}, {}};
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        t.rows.push_back({r.id, std::to_string(m.cc), format_number(m.hd), std::to_string(m.n1), std::to_string(m.n2),
                          std::to_string(m.N1), std::to_string(m.N2)});
    }
    return t;
}

std::vector<MetricsRow> parse_metrics_table(const CsvTable& t)
{
    const auto id = t.column("id"), cc = t.column("cc"), hd = t.column("hd"), n1 = t.column("n1"),
               n2 = t.column("n2"), N1 = t.column("N1"), N2 = t.column("N2");
    std::vector<MetricsRow> rows;
    for (const auto& r : t.rows) {
        MetricsRow m;
        m.id = r[id];
        m.metrics.cc = static_cast<int>(parse_uint(r[cc], "cc"));
        m.metrics.hd = parse_double(r[hd], "hd");
        m.metrics.n1 = parse_uint(r[n1], "n1");
        m.metrics.n2 = parse_uint(r[n2], "n2");
        m.metrics.N1 = parse_uint(r[N1], "N1");
        m.metrics.N2 = parse_uint(r[N2], "N2");
        rows.push_back(std::move(m));
    }
    return rows;
}

CsvTable scheme_table(const SchemeSet& schemes, ArtifactHeader header)
{
    CsvTable t{std::move(header), {"scope", "feature", "class", "lower", "upper", "coverage"}, {}};
    for (const auto& [key, scheme] : schemes) {
        for (std::size_t i = 0; i < scheme.boundaries.size(); ++i) {
            t.rows.push_back({key.first, std::string(to_string(key.second)), std::to_string(i),
                              format_number(scheme.boundaries[i].lower), format_number(scheme.boundaries[i].upper),
                              format_number(scheme.coverage)});
        }
    }
    if (!schemes.empty()) t.header.emplace_back("discarded_rule", schemes.begin()->second.discarded_rule);
    return t;
}

SchemeSet parse_scheme_table(const CsvTable& t)
{
    const auto scope = t.column("scope"), feature = t.column("feature"), cls = t.column("class"),
               lower = t.column("lower"), upper = t.column("upper"), coverage = t.column("coverage");
    SchemeSet out;
    for (const auto& r : t.rows) {
        auto& s = out[{r[scope], parse_feature(r[feature])}];
        s.feature = parse_feature(r[feature]);
        s.coverage = parse_double(r[coverage], "coverage");
        s.discarded_rule = t.header_value("discarded_rule");
        if (parse_uint(r[cls], "class") != s.boundaries.size()) throw Error("scheme classes out of order");
        s.boundaries.push_back({parse_double(r[lower], "lower"), parse_double(r[upper], "upper")});
    }
    return out;
}

const BinningScheme& find_scheme(const SchemeSet& schemes, const std::string& dataset, Feature feature)
{
    if (const auto it = schemes.find({dataset, feature}); it != schemes.end()) return it->second;
    if (const auto it = schemes.find({"*", feature}); it != schemes.end()) return it->second;
    throw Error("no " + std::string(to_string(feature)) + " binning scheme for dataset '" + dataset + "'");
}

CsvTable curve_table(const LayerAccuracyCurve& curve, ArtifactHeader header)
{
    std::set<std::string> groups;
    for (const auto& l : curve.layers) {
        for (const auto& [g, acc] : l.per_group) groups.insert(g);
    }
    CsvTable t{std::move(header), {"layer"}, {}};
    t.header.insert(t.header.begin(), {{"dataset", curve.dataset_id},
                                       {"feature", std::string(to_string(curve.feature))},
                                       {"config_tag", curve.config_tag},
                                       {"layer_indexing", "0 = embedding output"}});
    t.columns.insert(t.columns.end(), groups.begin(), groups.end());
    t.columns.push_back("avg");
    for (const auto& l : curve.layers) {
        std::vector<std::string> row{std::to_string(l.layer)};
        for (const auto& g : groups) {
            const auto it = l.per_group.find(g);
            row.push_back(it == l.per_group.end() ? "" : format_number(it->second));
        }
        row.push_back(format_number(l.average));
        t.rows.push_back(std::move(row));
    }
    return t;
}

LayerAccuracyCurve parse_curve_table(const CsvTable& t)
{
    LayerAccuracyCurve c;
    c.dataset_id = t.header_value("dataset");
    c.feature = parse_feature(t.header_value("feature").empty() ? "CC" : t.header_value("feature"));
    c.config_tag = t.header_value("config_tag").empty() ? "baseline" : t.header_value("config_tag");
    const auto layer = t.column("layer"), avg = t.column("avg");
    for (const auto& r : t.rows) {
        LayerAccuracy l;
        l.layer = static_cast<std::uint32_t>(parse_uint(r[layer], "layer"));
        if (l.layer != c.layers.size()) throw Error("curve layers must be listed 0, 1, 2, ...");
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
            if (i == layer || i == avg || r[i].empty()) continue;
            l.per_group[t.columns[i]] = parse_double(r[i], "curve accuracy");
        }
        l.average = parse_double(r[avg], "curve avg");
        c.layers.push_back(std::move(l));
    }
    if (c.layers.empty()) throw Error("curve file has no layers");
    return c;
}

std::vector<EffectivenessRecord> parse_effectiveness_table(const CsvTable& t)
{
    const auto dataset = t.column("dataset");
    const auto config = t.column("config");
    std::vector<std::pair<Metric, std::size_t>> metric_columns;
    for (auto m : {Metric::precision, Metric::recall, Metric::f1, Metric::accuracy}) {
        const auto it = std::find(t.columns.begin(), t.columns.end(), to_string(m));
        if (it != t.columns.end()) metric_columns.emplace_back(m, static_cast<std::size_t>(it - t.columns.begin()));
    }
    if (metric_columns.empty()) throw Error("effectiveness table has no metric columns");

    std::vector<EffectivenessRecord> out;
    for (const auto& r : t.rows) {
        EffectivenessRecord e{r[dataset], r[config], {}};
        for (const auto& [m, col] : metric_columns) {
            if (!r[col].empty()) e.metrics[m] = parse_double(r[col], to_string(m));
        }
        e.validate();
        out.push_back(std::move(e));
    }
    return out;
}

std::string beta_table_json(const BetaTable& table, const ArtifactHeader& header)
{
    nlohmann::ordered_json doc;
    for (const auto& [k, v] : header) doc["meta"][k] = v;
    doc["provenance"] = table.provenance;
    doc["entries"] = nlohmann::ordered_json::array();
    for (const auto& [key, beta] : table.entries) {
        doc["entries"].push_back({{"feature", std::string(to_string(key.feature))},
                                  {"config_tag", key.config_tag},
                                  {"metric", std::string(to_string(key.metric))},
                                  {"beta", beta}});
    }
    return doc.dump(2) + "\n";
}

BetaTable parse_beta_table_json(const std::string& text)
{
    BetaTable t;
    try {
        const auto doc = nlohmann::json::parse(text);
        t.provenance = doc.at("provenance").get<std::vector<std::string>>();
        for (const auto& e : doc.at("entries")) {
            const double beta = e.at("beta").get<double>();
            if (!(beta >= -1.0 && beta <= 1.0)) throw Error("knowledge base beta outside [-1, 1]");
            t.entries[{parse_feature(e.at("feature").get<std::string>()), e.at("config_tag").get<std::string>(),
                       parse_metric(e.at("metric").get<std::string>())}] = beta;
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("knowledge base: ") + e.what());
    }
    if (t.provenance.empty()) throw Error("knowledge base has no provenance");
    return t;
}

std::string prune_plan_json(const PrunePlan& plan, const ArtifactHeader& header)
{
    nlohmann::ordered_json doc;
    for (const auto& [k, v] : header) doc["meta"][k] = v;
    doc["layer_indexing"] = "0 = embedding output";
    doc["k_cut"] = plan.k_cut;
    doc["total_layers"] = plan.total_layers;
    doc["retained_layers"] = plan.retained;
    doc["removed_layers"] = plan.removed;
    return doc.dump(2) + "\n";
}

namespace {

// Config columns in the fixed order of the setup phases, unknown tags after.
std::vector<std::string> ordered_configs(const LooResult& result)
{
    static const std::vector<std::string> canonical = {"baseline", "quant4", "quant8", "pruned", "pruned_quant4", "pruned_quant8"};
    std::set<std::string> present;
    for (const auto& r : result.rows) present.insert(r.config_tag);
    std::vector<std::string> out;
    for (const auto& c : canonical) {
        if (present.erase(c)) out.push_back(c);
    }
    out.insert(out.end(), present.begin(), present.end());
    return out;
}

std::vector<Metric> ordered_metrics(const LooResult& result)
{
    std::set<Metric> present;
    for (const auto& r : result.rows) {
        for (const auto& [m, e] : r.error) present.insert(m);
    }
    return {present.begin(), present.end()};
}

std::vector<std::string> matrix_columns(const std::vector<std::string>& configs, const std::vector<Metric>& metrics,
                                        std::vector<std::string> leading)
{
    for (const auto& c : configs) {
        for (auto m : metrics) leading.push_back(c + ":" + std::string(to_string(m)));
    }
    return leading;
}

} // namespace

CsvTable loocv_error_matrix(const LooResult& result, ArtifactHeader header)
{
    const auto configs = ordered_configs(result);
    const auto metrics = ordered_metrics(result);
    CsvTable t{std::move(header), matrix_columns(configs, metrics, {"feature", "lp_datasets", "prediction_dataset"}), {}};
    t.header.emplace_back("units", "|Err| in percent");

    // feature -> held-out -> (lp datasets, config -> row)
    std::map<Feature, std::map<std::string, std::pair<std::string, std::map<std::string, const LooRow*>>>> layout;
    for (const auto& r : result.rows) {
        auto& cell = layout[r.feature][r.held_out];
        cell.first = join(r.knowledge_datasets, "+");
        cell.second[r.config_tag] = &r;
    }
    for (const auto& [feature, by_held_out] : layout) {
        for (const auto& [held_out, cell] : by_held_out) {
            std::vector<std::string> row{std::string(to_string(feature)), cell.first, held_out};
            for (const auto& c : configs) {
                const auto it = cell.second.find(c);
                for (auto m : metrics) {
                    if (it == cell.second.end() || !it->second->error.contains(m)) {
                        row.emplace_back();
                    } else {
                        row.push_back(percent(std::abs(it->second->error.at(m))));
                    }
                }
            }
            t.rows.push_back(std::move(row));
        }
        std::vector<std::string> mean_row{std::string(to_string(feature)), "", "Mean"};
        for (const auto& c : configs) {
            const auto it = std::find_if(result.means.begin(), result.means.end(),
                                         [&](const LooMean& m) { return m.feature == feature && m.config_tag == c; });
            for (auto m : metrics) {
                if (it == result.means.end() || !it->mean_abs_error.contains(m)) {
                    mean_row.emplace_back();
                } else {
                    mean_row.push_back(percent(it->mean_abs_error.at(m)));
                }
            }
        }
        t.rows.push_back(std::move(mean_row));
    }
    return t;
}

CsvTable loocv_beta_matrix(const LooResult& result, std::span<const KnowledgeEntry> all, ArtifactHeader header)
{
    const auto configs = ordered_configs(result);
    const auto metrics = ordered_metrics(result);
    CsvTable t{std::move(header), matrix_columns(configs, metrics, {"feature", "lp_datasets"}), {}};
    t.header.emplace_back("units", "beta in percent");

    const BetaTable all_betas = compute_beta(all);
    std::map<Feature, std::map<std::string, std::map<std::string, const LooRow*>>> layout;
    for (const auto& r : result.rows) layout[r.feature][join(r.knowledge_datasets, "+")][r.config_tag] = &r;
    for (const auto& [feature, by_knowledge] : layout) {
        for (const auto& [knowledge, by_config] : by_knowledge) {
            std::vector<std::string> row{std::string(to_string(feature)), knowledge};
            for (const auto& c : configs) {
                const auto it = by_config.find(c);
                for (auto m : metrics) {
                    if (it == by_config.end() || !it->second->beta.contains(m)) {
                        row.emplace_back();
                    } else {
                        row.push_back(percent(it->second->beta.at(m)));
                    }
                }
            }
            t.rows.push_back(std::move(row));
        }
        std::vector<std::string> all_row{std::string(to_string(feature)), "All D"};
        for (const auto& c : configs) {
            for (auto m : metrics) {
                const auto it = all_betas.entries.find({feature, c, m});
                all_row.push_back(it == all_betas.entries.end() ? "" : percent(it->second));
            }
        }
        t.rows.push_back(std::move(all_row));
    }
    return t;
}

CsvTable loocv_signed_table(const LooResult& result, ArtifactHeader header)
{
    CsvTable t{std::move(header),
               {"feature", "config", "lp_datasets", "prediction_dataset", "metric", "beta", "estimate", "err", "abs_err"},
               {}};
    for (const auto& r : result.rows) {
        for (const auto& [m, e] : r.error) {
            t.rows.push_back({std::string(to_string(r.feature)), r.config_tag, join(r.knowledge_datasets, "+"), r.held_out,
                              std::string(to_string(m)), format_number(r.beta.at(m)), format_number(r.estimate.at(m)),
                              format_number(e), format_number(std::abs(e))});
        }
    }
    return t;
}

} // namespace lpass
