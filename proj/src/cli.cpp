#include <lpass/activation.hpp>
#include <lpass/artifacts.hpp>
#include <lpass/cli.hpp>
#include <lpass/dataset.hpp>
#include <lpass/error.hpp>
#include <lpass/estimator.hpp>
#include <lpass/metrics.hpp>
#include <lpass/probe.hpp>
#include <lpass/pruning.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace lpass::cli {

namespace {

struct GlobalOptions {
    seed_t seed = 0;
    std::string out_dir = ".";
    bool quiet = false;
};

struct FeaturesOptions {
    std::string manifest;
    std::uint64_t max_tokens = 0;
    std::size_t top_cwes = 0;
    bool estimate_tokens = false;
    double coverage = 0.85;
    double cc_width = 1.0;
    double hd_width = 5.0;
    bool global_bins = false;
    std::size_t balance = 0;
    double val_fraction = 0.2;
};

struct BinsOptions {
    std::string metrics;
    std::string samples;
    double coverage = 0.85;
    double cc_width = 1.0;
    double hd_width = 5.0;
    bool global_bins = false;
};

struct ProbeOptions {
    std::string activations;
    std::string metrics;
    std::string scheme;
    std::string samples;
    std::string feature = "CC";
    std::string dataset;
    std::string hidden = "128";
    double lr = 1e-3;
    int epochs = 30;
    index_t batch = 64;
    std::string pool;
    std::string optimizer = "adam";
    double val_fraction = 0.2;
    bool no_equalize = false;
    unsigned threads = 1;
    std::string name;
};

struct KcutOptions {
    std::vector<std::string> curves;
    int force_k = -1;
    int total_layers = -1;
};

struct EstimateOptions {
    std::string effectiveness;
    std::vector<std::string> curves;
    std::string betas;
    std::vector<std::string> targets;
    std::vector<std::string> configs;
    std::string truth;
    std::string policy = "best_layer";
    int kcut = -1;
    std::string decision;
};

struct LoocvOptions {
    std::string effectiveness;
    std::vector<std::string> curves;
    std::string policy = "best_layer";
    int kcut = -1;
    std::string decision;
};

struct ReportOptions {
    std::vector<std::string> inputs;
};

// Every option that shapes an artifact, rendered in declaration order.
// Output location and verbosity do not change artifact content and are left out.
std::string flag_string(const CLI::App& app, const CLI::App& sub)
{
    std::vector<std::string> parts;
    const auto render = [&](const CLI::App& a) {
        for (const CLI::Option* opt : a.get_options()) {
            const std::string name = opt->get_name(false, true);
            if (name.empty() || name == "--help" || name == "--out" || name == "--quiet") continue;
            std::string value;
            if (opt->count() > 0) {
                const auto& results = opt->results();
                for (std::size_t i = 0; i < results.size(); ++i) value += (i ? ";" : "") + results[i];
                if (results.empty()) value = "true";
            } else {
                value = opt->get_default_str();
                if (value.empty()) continue;
            }
            parts.push_back(name + "=" + value);
        }
    };
    render(app);
    render(sub);
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? " " : "") + parts[i];
    return s;
}

ArtifactHeader make_header(const std::string& subcommand, const GlobalOptions& g, const std::string& flags,
                           const std::vector<std::string>& inputs)
{
    std::string joined;
    for (std::size_t i = 0; i < inputs.size(); ++i) joined += (i ? ";" : "") + inputs[i];
    return {{"producer", "lpass " + subcommand},
            {"version", std::string(tool_version)},
            {"seed", std::to_string(g.seed)},
            {"flags", flags},
            {"inputs", joined}};
}

fs::path output_path(const GlobalOptions& g, const std::string& name) { return fs::path(g.out_dir) / name; }

void write_table(const GlobalOptions& g, const std::string& name, const CsvTable& table)
{
    std::ostringstream os;
    write_csv(os, table);
    write_text_file(output_path(g, name), os.str());
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void note(const GlobalOptions& g, std::ostream& out, const std::string& msg)
{
    if (!g.quiet) out << msg << '\n';
}

double feature_value(const FunctionMetrics& m, Feature f) { return f == Feature::cc ? m.cc : m.hd; }

SchemeSet build_schemes(const std::vector<MetricsRow>& rows,
                        const std::map<std::string, std::string>& dataset_of,
                        bool global,
                        double coverage,
                        double cc_width,
                        double hd_width)
{
    std::map<std::string, std::vector<const MetricsRow*>> by_scope;
    for (const auto& r : rows) {
        const auto it = dataset_of.find(r.id);
        by_scope[global || it == dataset_of.end() ? "*" : it->second].push_back(&r);
    }
    SchemeSet schemes;
    for (const auto& [scope, members] : by_scope) {
        for (auto f : {Feature::cc, Feature::hd}) {
            std::vector<double> values;
            for (const auto* r : members) values.push_back(feature_value(r->metrics, f));
            try {
                schemes[{scope, f}] = derive_bins(values, f, coverage, f == Feature::cc ? cc_width : hd_width);
            } catch (const Error& e) {
                throw Error("scope '" + scope + "' " + std::string(to_string(f)) + ": " + e.what());
            }
        }
    }
    return schemes;
}

int run_features(const GlobalOptions& g, const FeaturesOptions& o, const std::string& flags, std::ostream& out)
{
    auto samples = load_manifest(o.manifest);
    if (o.estimate_tokens) {
        const auto filled = fill_token_estimates(samples);
        if (filled) note(g, out, "estimated token counts (approximate) for " + std::to_string(filled) + " samples");
    }

    if (o.max_tokens > 0 || o.top_cwes > 0) {
        std::map<std::string, std::vector<CodeSample>> by_dataset;
        for (const auto& s : samples) by_dataset[s.dataset_id].push_back(s);
        std::map<std::string, std::set<std::string>> allowed;
        for (const auto& [d, members] : by_dataset) {
            auto& set = allowed[d];
            if (o.top_cwes > 0) {
                const auto top = select_top_cwes(members, o.top_cwes);
                if (top.fewer_than_requested) {
                    note(g, out, "warning: dataset " + d + " has only " + std::to_string(top.labels.size()) + " CWE labels");
                }
                set.insert(top.labels.begin(), top.labels.end());
                set.insert(std::string(no_cwe_label));
            } else {
                for (const auto& s : members) set.insert(s.cwe_label);
            }
        }
        const std::uint64_t limit = o.max_tokens > 0 ? o.max_tokens : UINT64_MAX;
        std::vector<CodeSample> kept;
        for (const auto& s : samples) {
            const CodeSample one[] = {s};
            auto f = filter_samples(one, limit, allowed.at(s.dataset_id));
            kept.insert(kept.end(), f.begin(), f.end());
        }
        samples = std::move(kept);
    }

    std::vector<MetricsRow> rows;
    std::map<std::string, std::string> dataset_of;
    for (const auto& s : samples) {
        try {
            rows.push_back({s.id, function_metrics(s.source_text)});
        } catch (const Error& e) {
            throw Error("sample '" + s.id + "': " + e.what());
        }
        dataset_of[s.id] = s.dataset_id;
    }

    const auto header = make_header("features", g, flags, {o.manifest});
    write_table(g, "metrics.csv", metrics_table(rows, header));
    if (!rows.empty()) {
        auto scheme_header = header;
        scheme_header.emplace_back("scope", o.global_bins ? "global" : "per-dataset");
        write_table(g, "scheme.csv",
                    scheme_table(build_schemes(rows, dataset_of, o.global_bins, o.coverage, o.cc_width, o.hd_width),
                                 scheme_header));
    }
    if (o.balance > 0) {
        const auto plan = balance_classes(samples, o.balance, o.val_fraction, g.seed);
        CsvTable split{header, {"id", "role"}, {}};
        split.header.emplace_back("per_class_limit", std::to_string(plan.per_class_limit));
        for (const auto& id : plan.train_ids) split.rows.push_back({id, "train"});
        for (const auto& id : plan.val_ids) split.rows.push_back({id, "val"});
        write_table(g, "split.csv", split);
    }
    note(g, out, "features: " + std::to_string(rows.size()) + " samples");
    return 0;
}

int run_bins(const GlobalOptions& g, const BinsOptions& o, const std::string& flags, std::ostream& out)
{
    const auto rows = parse_metrics_table(read_csv(o.metrics));
    if (rows.empty()) throw Error("metrics file has no rows");
    std::map<std::string, std::string> dataset_of;
    std::vector<std::string> inputs{o.metrics};
    if (!o.samples.empty()) {
        for (const auto& s : load_manifest(o.samples)) dataset_of[s.id] = s.dataset_id;
        inputs.push_back(o.samples);
    }
    const bool global = o.global_bins || o.samples.empty();
    auto header = make_header("bins", g, flags, inputs);
    header.emplace_back("scope", global ? "global" : "per-dataset");
    const auto schemes = build_schemes(rows, dataset_of, global, o.coverage, o.cc_width, o.hd_width);
    write_table(g, "scheme.csv", scheme_table(schemes, header));
    for (const auto& [key, s] : schemes) {
        note(g, out, "bins: " + key.first + "/" + std::string(to_string(key.second)) + " -> " +
                         std::to_string(s.num_classes()) + " classes");
    }
    return 0;
}

std::vector<index_t> parse_hidden(const std::string& text)
{
    std::vector<index_t> sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            sizes.push_back(std::stol(item));
        } catch (const std::exception&) {
            throw Error("invalid --hidden entry '" + item + "'");
        }
    }
    if (sizes.empty()) throw Error("--hidden needs at least one layer size");
    return sizes;
}

int run_probe(const GlobalOptions& g, const ProbeOptions& o, const std::string& flags, std::ostream& out)
{
    const auto manifest = read_activation_manifest(o.activations);
    if (!o.pool.empty() && parse_pooling(o.pool) != manifest.pooling) {
        throw Error("--pool " + o.pool + " does not match the activation set's pooling " +
                    std::string(to_string(manifest.pooling)));
    }
    const auto layers = load_activation_set(manifest);
    const Feature feature = parse_feature(o.feature);

    std::map<std::string, CodeSample> samples;
    if (!o.samples.empty()) {
        for (auto& s : load_manifest(o.samples)) samples.emplace(s.id, std::move(s));
    }

    std::string dataset = o.dataset;
    if (dataset.empty()) {
        std::set<std::string> seen;
        for (const auto& id : layers.front().sample_ids) {
            if (const auto it = samples.find(id); it != samples.end()) seen.insert(it->second.dataset_id);
        }
        if (seen.size() > 1) throw Error("activation set spans several datasets; pass --dataset");
        dataset = seen.empty() ? "unknown" : *seen.begin();
    }

    const auto schemes = parse_scheme_table(read_csv(o.scheme));
    const BinningScheme& scheme = find_scheme(schemes, dataset, feature);

    std::map<std::string, ProbeLabel> labels;
    std::size_t discarded = 0;
    for (const auto& row : parse_metrics_table(read_csv(o.metrics))) {
        const auto cls = assign_class(feature_value(row.metrics, feature), scheme);
        if (!cls) {
            ++discarded;
            continue;
        }
        std::string group = "all";
        if (const auto it = samples.find(row.id); it != samples.end()) {
            if (!o.dataset.empty() && it->second.dataset_id != o.dataset) continue;
            group = it->second.cwe_label;
        }
        labels[row.id] = {static_cast<index_t>(*cls), group};
    }

    ProbeConfig config;
    config.hidden_layer_sizes = parse_hidden(o.hidden);
    config.learning_rate = o.lr;
    config.epochs = o.epochs;
    config.batch_size = o.batch;
    config.seed = g.seed;
    if (o.optimizer == "adam") {
        config.optimizer = Optimizer::adam;
    } else if (o.optimizer == "sgd") {
        config.optimizer = Optimizer::sgd;
    } else {
        throw Error("unknown optimizer '" + o.optimizer + "'");
    }
    ProbeProtocol protocol;
    protocol.val_fraction = o.val_fraction;
    protocol.equalize_groups = !o.no_equalize;
    protocol.threads = o.threads;

    auto curve = probe_all_layers(layers, labels, config, protocol);
    curve.dataset_id = dataset;
    curve.feature = feature;
    curve.config_tag = std::string(to_string(manifest.config_tag));

    std::vector<std::string> inputs{o.activations, o.metrics, o.scheme};
    if (!o.samples.empty()) inputs.push_back(o.samples);
    auto header = make_header("probe", g, flags, inputs);
    header.emplace_back("model_id", manifest.model_id);
    header.emplace_back("pooling", std::string(to_string(manifest.pooling)));
    header.emplace_back("protocol", "seeded stratified " + format_number(1.0 - o.val_fraction) + "/" +
                                        format_number(o.val_fraction) + " split of probe inputs" +
                                        (protocol.equalize_groups ? ", groups equalized by downsampling" : "") +
                                        ", per-layer seed = seed XOR layer");
    header.emplace_back("discarded_samples", std::to_string(discarded));

    const std::string name = !o.name.empty() ? o.name
                                             : "curve_" + dataset + "_" + std::string(to_string(feature)) + "_" +
                                                   curve.config_tag + ".csv";
    write_table(g, name, curve_table(curve, header));
    note(g, out, "probe: " + std::to_string(curve.layers.size()) + " layers -> " + name);
    return 0;
}

std::vector<LayerAccuracyCurve> load_curves(const std::vector<std::string>& paths)
{
    std::vector<LayerAccuracyCurve> curves;
    for (const auto& p : paths) {
        try {
            curves.push_back(parse_curve_table(read_csv(p)));
        } catch (const Error& e) {
            throw Error(p + ": " + e.what());
        }
    }
    return curves;
}

int run_kcut(const GlobalOptions& g, const KcutOptions& o, const std::string& flags, std::ostream& out)
{
    const auto curves = load_curves(o.curves);
    std::vector<LossCurve> losses;
    for (const auto& c : curves) losses.push_back(loss_curve(c));
    const auto decision = select_kcut(losses);

    const auto n_layers = static_cast<std::uint32_t>(decision.total_score.size());
    const std::uint32_t total = o.total_layers >= 0 ? static_cast<std::uint32_t>(o.total_layers) : n_layers - 1;
    std::uint32_t k_cut = decision.k_cut;
    if (o.force_k >= 0) {
        if (static_cast<std::uint32_t>(o.force_k) > total) throw Error("--force-k beyond the last layer");
        k_cut = static_cast<std::uint32_t>(o.force_k);
    }

    auto header = make_header("kcut", g, flags, o.curves);
    header.emplace_back("layer_indexing", "0 = embedding output");
    header.emplace_back("k_cut_argmin", std::to_string(decision.k_cut));
    header.emplace_back("k_cut", std::to_string(k_cut));
    header.emplace_back("k_cut_source", o.force_k >= 0 ? "forced (--force-k)" : "argmin of summed |loss|");
    header.emplace_back("total_layers", std::to_string(total));
    if (k_cut > 0 && k_cut < total) {
        const auto base = baseline_cutpoints(k_cut, total, g.seed);
        std::string removed;
        for (std::size_t i = 0; i < base.random_removed.size(); ++i) removed += (i ? ";" : "") + std::to_string(base.random_removed[i]);
        header.emplace_back("half_cut", std::to_string(base.half_cut));
        header.emplace_back("random_removed", removed);
    } else {
        header.emplace_back("half_cut", "n/a");
        header.emplace_back("random_removed", "n/a");
    }

    CsvTable table{header, {"layer", "total_score"}, {}};
    for (const auto& id : decision.curve_ids) table.columns.push_back("loss:" + id);
    for (std::uint32_t k = 0; k < n_layers; ++k) {
        std::vector<std::string> row{std::to_string(k), format_number(decision.total_score[k])};
        for (const auto& l : losses) row.push_back(format_number(l.losses[k]));
        table.rows.push_back(std::move(row));
    }
    write_table(g, "decision.csv", table);
    write_text_file(output_path(g, "prune_plan.json"),
                    prune_plan_json(prune_plan(k_cut, total), make_header("kcut", g, flags, o.curves)));
    note(g, out, "kcut: k_cut = " + std::to_string(k_cut) + " of " + std::to_string(total) + " layers");
    return 0;
}

std::optional<std::uint32_t> resolve_kcut(int kcut, const std::string& decision_path)
{
    if (kcut >= 0) return static_cast<std::uint32_t>(kcut);
    if (decision_path.empty()) return std::nullopt;
    const auto table = read_csv(decision_path);
    const auto value = table.header_value("k_cut");
    if (value.empty()) throw Error(decision_path + ": no k_cut in header");
    return static_cast<std::uint32_t>(std::stoul(value));
}

std::vector<KnowledgeEntry> build_knowledge(const std::vector<EffectivenessRecord>& records,
                                            const std::vector<LayerAccuracyCurve>& curves,
                                            LayerPolicy policy,
                                            std::optional<std::uint32_t> kcut)
{
    std::vector<KnowledgeEntry> entries;
    std::set<Feature> features;
    for (const auto& c : curves) features.insert(c.feature);
    for (const auto& r : records) {
        for (auto f : features) {
            const LayerAccuracyCurve* match = nullptr;
            const LayerAccuracyCurve* fallback = nullptr;
            for (const auto& c : curves) {
                if (c.dataset_id != r.dataset_id || c.feature != f) continue;
                if (c.config_tag == r.config_tag) match = &c;
                if (c.config_tag == "baseline") fallback = &c;
            }
            const auto* curve = match ? match : fallback;
            if (!curve) continue;
            entries.push_back({r, summarize_curve(*curve, policy, kcut)});
        }
    }
    if (entries.empty()) throw Error("no effectiveness record matches a probe curve (dataset ids must agree)");
    return entries;
}

int run_estimate(const GlobalOptions& g, const EstimateOptions& o, const std::string& flags, std::ostream& out)
{
    const auto policy = parse_layer_policy(o.policy);
    const auto kcut = resolve_kcut(o.kcut, o.decision);
    std::vector<std::string> inputs;

    BetaTable betas;
    if (!o.betas.empty()) {
        betas = parse_beta_table_json(read_file(o.betas));
        inputs.push_back(o.betas);
    } else {
        if (o.effectiveness.empty() || o.curves.empty()) {
            throw Error("estimate needs --betas, or --effectiveness with --curves to build the knowledge base");
        }
        const auto records = parse_effectiveness_table(read_csv(o.effectiveness));
        const auto knowledge = build_knowledge(records, load_curves(o.curves), policy, kcut);
        betas = compute_beta(knowledge);
        inputs.push_back(o.effectiveness);
        inputs.insert(inputs.end(), o.curves.begin(), o.curves.end());
        auto header = make_header("estimate", g, flags, inputs);
        header.emplace_back("aggregator", "mean over knowledge datasets of (metric - acc_lp)");
        header.emplace_back("layer_policy", o.policy);
        write_text_file(output_path(g, "knowledge.json"), beta_table_json(betas, header));
        note(g, out, "estimate: knowledge base from " + std::to_string(betas.provenance.size()) + " datasets");
    }

    if (o.targets.empty()) return 0;
    inputs.insert(inputs.end(), o.targets.begin(), o.targets.end());

    std::vector<EffectivenessRecord> truth;
    if (!o.truth.empty()) {
        truth = parse_effectiveness_table(read_csv(o.truth));
        inputs.push_back(o.truth);
    }

    auto header = make_header("estimate", g, flags, inputs);
    header.emplace_back("layer_policy", o.policy);
    header.emplace_back("knowledge_datasets", [&] {
        std::string s;
        for (std::size_t i = 0; i < betas.provenance.size(); ++i) s += (i ? ";" : "") + betas.provenance[i];
        return s;
    }());
    CsvTable table{header,
                   {"dataset", "feature", "config", "layer_policy", "layer_used", "acc_lp", "metric", "beta", "estimate",
                    "truth", "err", "abs_err"},
                   {}};

    for (const auto& target : load_curves(o.targets)) {
        const auto summary = summarize_curve(target, policy, kcut);
        std::set<std::string> configs(o.configs.begin(), o.configs.end());
        if (configs.empty()) {
            for (const auto& [key, b] : betas.entries) {
                if (key.feature == summary.feature) configs.insert(key.config_tag);
            }
        }
        for (const auto& config : configs) {
            std::vector<Metric> metrics;
            for (const auto& [key, b] : betas.entries) {
                if (key.feature == summary.feature && key.config_tag == config) metrics.push_back(key.metric);
            }
            if (metrics.empty()) {
                throw Error("knowledge base has no beta for " + std::string(to_string(summary.feature)) + "/" + config);
            }
            const auto report = estimate(summary, betas, config, metrics);
            std::map<Metric, double> err;
            const EffectivenessRecord* t = nullptr;
            for (const auto& r : truth) {
                if (r.dataset_id == summary.dataset_id && r.config_tag == config) t = &r;
            }
            if (t) err = estimation_error(report, *t);
            for (auto m : metrics) {
                std::vector<std::string> row{summary.dataset_id,
                                             std::string(to_string(summary.feature)),
                                             config,
                                             std::string(to_string(summary.layer_policy)),
                                             std::to_string(summary.layer_used),
                                             format_number(summary.acc_lp),
                                             std::string(to_string(m)),
                                             format_number(betas.at({summary.feature, config, m})),
                                             format_number(report.estimate.at(m))};
                if (t) {
                    row.push_back(format_number(t->metrics.at(m)));
                    row.push_back(format_number(err.at(m)));
                    row.push_back(format_number(std::abs(err.at(m))));
                } else {
                    row.insert(row.end(), 3, "");
                }
                table.rows.push_back(std::move(row));
            }
        }
    }
    write_table(g, "estimate.csv", table);
    note(g, out, "estimate: " + std::to_string(table.rows.size()) + " estimates");
    return 0;
}

int run_loocv(const GlobalOptions& g, const LoocvOptions& o, const std::string& flags, std::ostream& out)
{
    const auto policy = parse_layer_policy(o.policy);
    const auto kcut = resolve_kcut(o.kcut, o.decision);
    const auto records = parse_effectiveness_table(read_csv(o.effectiveness));
    const auto knowledge = build_knowledge(records, load_curves(o.curves), policy, kcut);
    const auto result = leave_one_out(knowledge);

    std::vector<std::string> inputs{o.effectiveness};
    inputs.insert(inputs.end(), o.curves.begin(), o.curves.end());
    auto header = make_header("loocv", g, flags, inputs);
    header.emplace_back("layer_policy", o.policy);
    write_table(g, "loocv_err.csv", loocv_error_matrix(result, header));
    write_table(g, "loocv_beta.csv", loocv_beta_matrix(result, knowledge, header));
    write_table(g, "loocv_signed.csv", loocv_signed_table(result, header));
    note(g, out, "loocv: " + std::to_string(result.rows.size()) + " held-out estimates");
    return 0;
}

void render_block(std::ostream& os, const std::string& title, const CsvTable& table)
{
    os << "== " << title << " ==\n";
    CsvTable bare{{}, table.columns, table.rows};
    write_csv(os, bare);
    os << '\n';
}

int run_report(const GlobalOptions& g, const ReportOptions& o, const std::string& flags, std::ostream& out)
{
    std::vector<fs::path> files;
    for (const auto& in : o.inputs) {
        if (fs::is_directory(in)) {
            for (const auto& entry : fs::directory_iterator(in)) {
                if (entry.path().extension() == ".csv") files.push_back(entry.path());
            }
        } else {
            files.emplace_back(in);
        }
    }
    std::sort(files.begin(), files.end());

    std::vector<std::pair<std::string, CsvTable>> curves, decisions, loocv;
    for (const auto& f : files) {
        if (f.filename() == "plot_loss.csv") continue;
        auto table = read_csv(f);
        const auto producer = table.header_value("producer");
        if (producer == "lpass probe") {
            curves.emplace_back(f.filename().string(), std::move(table));
        } else if (producer == "lpass kcut") {
            decisions.emplace_back(f.filename().string(), std::move(table));
        } else if (producer == "lpass loocv" && f.filename() == "loocv_err.csv") {
            loocv.emplace_back(f.filename().string(), std::move(table));
        }
    }
    if (curves.empty() && decisions.empty() && loocv.empty()) throw Error("report: no lpass artifacts found");

    std::ostringstream os;
    os << "lpass report (version " << tool_version << ", seed " << g.seed << ")\n\n";

    CsvTable plot{make_header("report", g, flags, o.inputs), {"layer"}, {}};
    std::vector<LossCurve> losses;
    for (const auto& [name, table] : curves) {
        const auto curve = parse_curve_table(table);
        const auto loss = loss_curve(curve);
        CsvTable block{{}, {"layer", "avg_acc", "loss"}, {}};
        for (std::size_t k = 0; k < curve.layers.size(); ++k) {
            block.rows.push_back({std::to_string(k), format_number(curve.layers[k].average), format_number(loss.losses[k])});
        }
        render_block(os, "curve " + curve.dataset_id + "/" + std::string(to_string(curve.feature)) + " (" +
                             curve.config_tag + ") from " + name, block);
        plot.columns.push_back(curve.dataset_id + "/" + std::string(to_string(curve.feature)) + "/" + curve.config_tag);
        losses.push_back(loss);
    }
    if (!losses.empty()) {
        std::size_t n = 0;
        for (const auto& l : losses) n = std::max(n, l.losses.size());
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<std::string> row{std::to_string(k)};
            for (const auto& l : losses) row.push_back(k < l.losses.size() ? format_number(l.losses[k]) : "");
            plot.rows.push_back(std::move(row));
        }
        std::ostringstream ps;
        write_csv(ps, plot);
        write_text_file(output_path(g, "plot_loss.csv"), ps.str());
    }
    for (const auto& [name, table] : decisions) {
        os << "== decision from " << name << " ==\n";
        for (const auto& key : {"k_cut", "k_cut_source", "total_layers", "half_cut", "random_removed"}) {
            os << key << ": " << table.header_value(key) << '\n';
        }
        CsvTable bare{{}, table.columns, table.rows};
        write_csv(os, bare);
        os << '\n';
    }
    for (const auto& [name, table] : loocv) render_block(os, "estimation error |Err| % from " + name, table);

    write_text_file(output_path(g, "report.txt"), os.str());
    if (!g.quiet) out << os.str();
    return 0;
}

std::string single_line(std::string s)
{
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"lpass: linear-probe guided layer pruning and effectiveness estimation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tool_version));

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
    app.add_flag("--quiet", g.quiet, "Suppress progress output");

    FeaturesOptions fo;
    auto* features = app.add_subcommand("features", "Compute CC/HD per sample and derive class bins");
    features->add_option("manifest", fo.manifest, "Sample manifest (JSON Lines)")->required();
    features->add_option("--max-tokens", fo.max_tokens, "Drop samples above this token count (0 = keep all)")->capture_default_str();
    features->add_option("--top-cwes", fo.top_cwes, "Keep the N most frequent CWEs per dataset (0 = all)")->capture_default_str();
    features->add_flag("--estimate-tokens", fo.estimate_tokens, "Fill missing token counts with an approximate estimate");
    features->add_option("--coverage", fo.coverage, "Share of retained values the bins must cover")->capture_default_str();
    features->add_option("--cc-width", fo.cc_width, "CC bin width")->capture_default_str();
    features->add_option("--hd-width", fo.hd_width, "HD bin width")->capture_default_str();
    features->add_flag("--global-bins", fo.global_bins, "One scheme for all datasets instead of one per dataset");
    features->add_option("--balance", fo.balance, "Also write a balanced split with this many training rows per class")->capture_default_str();
    features->add_option("--val-fraction", fo.val_fraction, "Validation share per class for --balance")->capture_default_str();

    BinsOptions bo;
    auto* bins = app.add_subcommand("bins", "Re-derive class bins from a metrics file");
    bins->add_option("metrics", bo.metrics, "Metrics file written by `features`")->required();
    bins->add_option("--samples", bo.samples, "Sample manifest supplying dataset ids");
    bins->add_option("--coverage", bo.coverage)->capture_default_str();
    bins->add_option("--cc-width", bo.cc_width)->capture_default_str();
    bins->add_option("--hd-width", bo.hd_width)->capture_default_str();
    bins->add_flag("--global-bins", bo.global_bins);

    ProbeOptions po;
    auto* probe = app.add_subcommand("probe", "Train one probe per layer and write the accuracy curve");
    probe->add_option("activations", po.activations, "Activation-set manifest (JSON)")->required();
    probe->add_option("--metrics", po.metrics, "Metrics file")->required();
    probe->add_option("--scheme", po.scheme, "Scheme file")->required();
    probe->add_option("--samples", po.samples, "Sample manifest supplying CWE groups and dataset ids");
    probe->add_option("--feature", po.feature, "CC or HD")->capture_default_str();
    probe->add_option("--dataset", po.dataset, "Dataset id (defaults to the samples' dataset)");
    probe->add_option("--hidden", po.hidden, "Hidden layer sizes, comma separated")->capture_default_str();
    probe->add_option("--lr", po.lr)->capture_default_str();
    probe->add_option("--epochs", po.epochs)->capture_default_str();
    probe->add_option("--batch", po.batch)->capture_default_str();
    probe->add_option("--pool", po.pool, "Expected pooling of the activation set");
    probe->add_option("--optimizer", po.optimizer, "adam or sgd")->capture_default_str();
    probe->add_option("--val-fraction", po.val_fraction)->capture_default_str();
    probe->add_flag("--no-equalize", po.no_equalize, "Keep unequal CWE group sizes");
    probe->add_option("--threads", po.threads, "Layers trained in parallel")->capture_default_str();
    probe->add_option("--name", po.name, "Curve file name");

    KcutOptions ko;
    auto* kcut = app.add_subcommand("kcut", "Select the cut-off layer from accuracy curves");
    kcut->add_option("curves", ko.curves, "Curve files")->required();
    kcut->add_option("--force-k", ko.force_k, "Override the selected layer");
    kcut->add_option("--total-layers", ko.total_layers, "Transformer layers (default: curve length - 1)");

    EstimateOptions eo;
    auto* est = app.add_subcommand("estimate", "Fit beta and estimate effectiveness from probe accuracy");
    est->add_option("--effectiveness", eo.effectiveness, "Measured effectiveness of knowledge datasets (CSV)");
    est->add_option("--curves", eo.curves, "Probe curves of knowledge datasets");
    est->add_option("--betas", eo.betas, "Existing knowledge base (JSON)");
    est->add_option("--target", eo.targets, "Curve files of datasets to estimate");
    est->add_option("--config", eo.configs, "Config tags to estimate (default: all in the knowledge base)");
    est->add_option("--truth", eo.truth, "Measured effectiveness of the targets, for Err");
    est->add_option("--policy", eo.policy, "best_layer or at_kcut")->capture_default_str();
    est->add_option("--kcut", eo.kcut, "Cut-off layer for at_kcut");
    est->add_option("--decision", eo.decision, "Decision file supplying k_cut");

    LoocvOptions lo;
    auto* loocv = app.add_subcommand("loocv", "Leave-one-dataset-out validation of the estimator");
    loocv->add_option("--effectiveness", lo.effectiveness)->required();
    loocv->add_option("--curves", lo.curves)->required();
    loocv->add_option("--policy", lo.policy)->capture_default_str();
    loocv->add_option("--kcut", lo.kcut);
    loocv->add_option("--decision", lo.decision);

    ReportOptions ro;
    auto* report = app.add_subcommand("report", "Summarize artifacts and write plot data");
    report->add_option("inputs", ro.inputs, "Artifact files or directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << tool_version << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "lpass: error: " << single_line(e.what()) << '\n';
        err << app.help();
        return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (g.out_dir.empty()) throw Error("--out must not be empty");
        fs::create_directories(g.out_dir);
        const std::string flags = flag_string(app, *sub);
        if (sub == features) return run_features(g, fo, flags, out);
        if (sub == bins) return run_bins(g, bo, flags, out);
        if (sub == probe) return run_probe(g, po, flags, out);
        if (sub == kcut) return run_kcut(g, ko, flags, out);
        if (sub == est) return run_estimate(g, eo, flags, out);
        if (sub == loocv) return run_loocv(g, lo, flags, out);
        if (sub == report) return run_report(g, ro, flags, out);
    } catch (const std::exception& e) {
        err << "lpass: error: " << name << ": " << single_line(e.what()) << '\n';
        return 1;
    }
    return 1;
}

} // namespace lpass::cli
