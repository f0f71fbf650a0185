// canekit: command-line front end for curation, evaluation, profiling,
// explanation and the diagnosis service.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "canekit/canekit.hpp"

namespace fs = std::filesystem;
using namespace canekit;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// A class given by index or by (normalized) name.
std::size_t parse_class(const std::string& token, std::size_t classes) {
    const std::string t = trim(token);
    if (!t.empty() && t.find_first_not_of("0123456789") == std::string::npos) {
        const auto idx = static_cast<std::size_t>(std::stoull(t));
        if (idx >= classes) throw ArgumentError("class index " + t + " out of range");
        return idx;
    }
    const auto idx = class_index(t);
    if (!idx || *idx >= classes) throw ArgumentError("unknown class '" + t + "'");
    return *idx;
}

/// One label per non-empty line; an optional header line is skipped when
/// it is not itself a label.
std::vector<std::size_t> read_labels(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::vector<std::size_t> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        try {
            out.push_back(parse_class(line, kNumClasses));
        } catch (const ArgumentError&) {
            if (!first) throw;
        }
        first = false;
    }
    return out;
}

/// Row-major samples x classes probability matrix, comma separated.
std::vector<double> read_scores(const fs::path& path, std::size_t classes) {
    std::istringstream in(read_text(path));
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::size_t n = 0;
        std::vector<double> values;
        bool numeric = true;
        while (std::getline(row, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
            ++n;
        }
        if (!numeric && out.empty()) continue;  // header
        if (!numeric || n != classes) throw FormatError("score row must have " + std::to_string(classes) + " numbers");
        out.insert(out.end(), values.begin(), values.end());
    }
    return out;
}

/// "Class,count" lines or a JSON object {class: count}.
std::vector<std::pair<std::string, std::size_t>> read_counts(const fs::path& path) {
    const std::string text = read_text(path);
    std::vector<std::pair<std::string, std::size_t>> out;
    const std::string t = trim(text);
    if (!t.empty() && t.front() == '{') {
        const auto j = nlohmann::json::parse(t);
        for (const auto& [k, v] : j.items()) out.emplace_back(k, v.get<std::size_t>());
        return out;
    }
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw FormatError("expected 'class,count': " + line);
        const std::string count = trim(line.substr(comma + 1));
        if (count.empty() || count.find_first_not_of("0123456789") != std::string::npos) {
            if (out.empty()) continue;  // header
            throw FormatError("bad count in: " + line);
        }
        out.emplace_back(trim(line.substr(0, comma)), std::stoull(count));
    }
    return out;
}

void print_plan(const curation::CurationPlan& plan) {
    std::printf("%-18s %8s %6s %5s %6s %6s\n", "class", "original", "train", "test", "factor", "final");
    for (const auto& r : plan.rows)
        std::printf("%-18s %8zu %6zu %5zu %6zu %6zu\n", r.label.c_str(), r.original, r.train, r.test, r.factor,
                    r.final_train);
    std::printf("imbalance %.2f:1 -> %.2f:1\n", plan.original_imbalance(), plan.final_imbalance());
}

// ------------------------------------------------------------------ commands

struct CurateOpts {
    std::string dir;
    std::string out = "curation";
    std::uint64_t seed = 0;
    bool augment = false;
};

int cmd_curate(const CurateOpts& o) {
    const auto corpus = curation::scan_corpus(o.dir);
    for (const auto& s : corpus.skipped) std::cerr << "skip " << s.path << ": " << s.reason << '\n';
    const auto result = curation::dedup(corpus.entries);
    const auto renamed = curation::rename_normalize(result.survivors);

    std::map<std::string, std::vector<std::string>> members;
    std::map<std::string, std::string> new_name;
    for (const auto& r : renamed) {
        members[r.label].push_back(r.new_name);
        new_name[r.new_name] = r.old_path;
    }
    const auto split = curation::stratified_split(members, 0.8, o.seed);

    std::vector<std::pair<std::string, std::size_t>> counts;
    for (const auto& [label, m] : members) counts.emplace_back(label, m.size());
    const auto plan = curation::augmentation_plan(counts);

    const fs::path out(o.out);
    write_text(out / "removal_report.csv", curation::removal_report_csv(result));
    write_text(out / "manifest.csv", curation::manifest_csv(renamed));
    write_text(out / "plan.json", curation::plan_to_json(plan).dump(2) + "\n");
    write_text(out / "split.json", nlohmann::json{{"seed", o.seed}, {"train", split.train}, {"test", split.test}}.dump(2) + "\n");

    if (o.augment) {
        for (const auto& row : plan.rows) {
            if (row.factor == 0) continue;
            const fs::path dest = out / "augmented" / curation::class_stem(row.label);
            fs::create_directories(dest);
            for (const auto& name : split.train.at(row.label)) {
                const Image img = load_image(new_name.at(name));
                const auto copies = curation::apply_augmentations(img, row.factor, o.seed, fnv1a(name));
                const std::string stem = fs::path(name).stem().string();
                for (std::size_t i = 0; i < copies.size(); ++i)
                    save_image(dest / (stem + "_aug" + std::to_string(i + 1) + ".png"), copies[i]);
            }
        }
    }

    std::printf("scanned %zu images (%zu skipped)\n", corpus.entries.size(), corpus.skipped.size());
    std::printf("removed %zu exact and %zu near duplicates, %zu survivors\n", result.exact_count(), result.near_count(),
                result.survivors.size());
    print_plan(plan);
    std::printf("wrote %s\n", out.string().c_str());
    return 0;
}

int cmd_split_plan(const std::string& counts_path, const std::string& out) {
    const auto plan = curation::augmentation_plan(read_counts(counts_path));
    print_plan(plan);
    write_text(out, curation::plan_to_json(plan).dump(2) + "\n");
    return 0;
}

struct EvalOpts {
    std::string preds;
    std::string labels;
    std::string scores;
    std::string out = "report";
};

int cmd_eval(const EvalOpts& o) {
    const auto pred = read_labels(o.preds);
    const auto truth = read_labels(o.labels);
    const auto cm = metrics::confusion(truth, pred, kNumClasses);
    std::vector<double> scores;
    if (!o.scores.empty()) scores = read_scores(o.scores, kNumClasses);
    std::vector<std::string> names(kClassNames.begin(), kClassNames.end());
    const auto rep = metrics::report(cm, names, truth, scores);
    write_text(o.out + ".json", metrics::report_to_json(rep).dump(2) + "\n");
    write_text(o.out + ".csv", metrics::report_to_csv(rep));
    std::printf("samples %zu\naccuracy %.4f\nmacro_precision %.4f\nmacro_recall %.4f\nmacro_f1 %.4f\n", rep.samples,
                rep.accuracy, rep.macro.precision, rep.macro.recall, rep.macro.f1);
    for (const auto& row : rep.per_class)
        std::printf("  %-18s f1 %.2f  support %llu\n", row.name.c_str(), row.metrics.f1,
                    static_cast<unsigned long long>(row.metrics.support));
    return 0;
}

int cmd_bench(const std::string& model, std::size_t runs, std::size_t warmup, const std::string& out) {
    if (runs < kMinBenchRuns || warmup < kMinBenchWarmup)
        throw UsageError("bench needs --runs >= 30 and --warmup >= 10");
    const auto report = bench_file(model, runs, warmup);
    std::cout << format_report(report);
    write_text(out, to_json(report).dump(2) + "\n");
    return 0;
}

int cmd_profile(const std::string& model, const std::string& out) {
    const auto loaded = load_weights_file(model);
    const auto& cfg = loaded.model.config();
    const auto cost = count_macs(loaded.model, cfg.input_size, cfg.input_size);
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : cost.layers) {
        layers.push_back({{"name", l.name}, {"kind", l.kind}, {"params", l.params}, {"buffers", l.buffers},
                          {"macs", l.macs}, {"out_h", l.out_h}, {"out_w", l.out_w}});
        std::printf("%-28s %-6s %10llu %12llu\n", l.name.c_str(), l.kind.c_str(),
                    static_cast<unsigned long long>(l.params), static_cast<unsigned long long>(l.macs));
    }
    std::printf("total params %llu (buffers %llu), MACs %llu, container %llu bytes\n",
                static_cast<unsigned long long>(cost.total_params), static_cast<unsigned long long>(cost.total_buffers),
                static_cast<unsigned long long>(cost.total_macs), static_cast<unsigned long long>(cost.file_bytes));
    write_text(out, nlohmann::json{{"layers", layers},
                                   {"total_params", cost.total_params},
                                   {"total_buffers", cost.total_buffers},
                                   {"total_macs", cost.total_macs},
                                   {"file_bytes", cost.file_bytes}}
                            .dump(2) +
                        "\n");
    return 0;
}

int cmd_explain(const std::string& model, const std::string& image, const std::string& cls, const std::string& out) {
    const auto loaded = load_weights_file(model);
    const Image img = load_image(image);
    std::optional<std::size_t> target;
    if (!cls.empty()) {
        try {
            target = parse_class(cls, loaded.model.config().num_classes);
        } catch (const ArgumentError& e) {
            throw UsageError(e.what());
        }
    }
    const auto cam = xai::explain(loaded.model, img, target);
    write_file(out, encode_png(cam.overlay));
    const fs::path json_path = fs::path(out).replace_extension(".json");
    const auto& m = cam.normalized_map;
    write_text(json_path, nlohmann::json{{"target_class", class_name(cam.target_class)},
                                         {"target_index", cam.target_class},
                                         {"map_height", m.shape().h},
                                         {"map_width", m.shape().w},
                                         {"normalized_map", std::vector<float>(m.data().begin(), m.data().end())}}
                              .dump() +
                              "\n");
    std::printf("explained class %s (%zu); overlay %s\n", class_name(cam.target_class).c_str(), cam.target_class,
                out.c_str());
    return 0;
}

std::atomic<bool> g_stop{false};
httplib::Server* g_server = nullptr;

void on_signal(int) {
    g_stop = true;
    if (g_server) g_server->stop();
}

struct ServeOpts {
    std::string model;
    int port = 8080;
    std::string host = "0.0.0.0";
    std::string reco_endpoint;
    std::string ui_dir;
};

int cmd_serve(ServeOpts o) {
    if (o.model.empty()) o.model = env_or("MODEL_PATH", "");
    if (o.model.empty()) throw UsageError("serve needs a model path (argument or MODEL_PATH)");
    if (o.reco_endpoint.empty()) o.reco_endpoint = env_or("RECO_ENDPOINT", "");
    DiagnosisService service(make_provider(o.reco_endpoint, env_or("RECO_KEY", "")));

    httplib::Server server;
    build_routes(server, service, {o.ui_dir, kMaxUploadBytes, true});
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    std::thread loader([&] {
        try {
            for (const auto& w : service.load_file(o.model))
                std::cerr << nlohmann::json{{"event", "load_warning"}, {"message", w}}.dump() << '\n';
            std::cerr << nlohmann::json{{"event", "model_loaded"}, {"path", o.model}}.dump() << '\n';
        } catch (const std::exception& e) {
            std::cerr << nlohmann::json{{"event", "load_failed"}, {"error", e.what()}}.dump() << '\n';
            server.stop();
        }
    });
    std::cerr << nlohmann::json{{"event", "listening"}, {"host", o.host}, {"port", o.port}}.dump() << '\n';
    const bool ok = server.listen(o.host, o.port);
    loader.join();
    g_server = nullptr;
    if (!service.loaded()) return 1;
    if (!ok && !g_stop) throw IoError("cannot listen on " + o.host + ":" + std::to_string(o.port));
    return 0;
}

int cmd_init_model(std::uint64_t seed, std::size_t classes, const std::string& out) {
    ModelConfig cfg;
    cfg.num_classes = classes;
    const ModelGraph model = build_model(cfg, seed);
    save_weights_file(out, model);
    std::printf("wrote %s (%llu bytes, md5 %s)\n", out.c_str(),
                static_cast<unsigned long long>(fs::file_size(out)), md5_hex(read_file(out)).c_str());
    return 0;
}

int cmd_embed(const std::string& model, const std::string& dir, const std::string& out) {
    const auto loaded = load_weights_file(model);
    std::vector<EmbeddingInput> inputs;
    std::vector<fs::path> class_dirs;
    for (const auto& d : fs::directory_iterator(dir))
        if (d.is_directory()) class_dirs.push_back(d.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const auto& cdir : class_dirs) {
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(cdir))
            if (f.is_regular_file()) files.push_back(f.path());
        std::sort(files.begin(), files.end());
        const auto idx = class_index(cdir.filename().string());
        const std::string label = idx ? std::string(kClassNames[*idx]) : cdir.filename().string();
        for (const auto& f : files) inputs.push_back({f.filename().string(), label, f});
    }
    const auto result = export_embeddings(loaded.model, inputs);
    for (const auto& s : result.skipped)
        std::cerr << nlohmann::json{{"event", "embed_skip"}, {"image_id", s.image_id}, {"reason", s.reason}}.dump()
                  << '\n';
    write_text(out, embeddings_csv(result, loaded.model.config().final_conv_channels));
    std::printf("wrote %zu rows (%zu skipped) to %s\n", result.rows.size(), result.skipped.size(), out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sugarcane leaf-disease toolkit"};
    app.require_subcommand(1);

    CurateOpts curate;
    auto* c_curate = app.add_subcommand("curate", "deduplicate, rename, split and plan augmentation for a class-per-folder corpus");
    c_curate->add_option("dir", curate.dir, "corpus root")->required()->check(CLI::ExistingDirectory);
    c_curate->add_option("--out", curate.out, "output directory");
    c_curate->add_option("--seed", curate.seed, "split / augmentation seed");
    c_curate->add_flag("--augment", curate.augment, "also write augmented training images");

    std::string counts_path, plan_out = "plan.json";
    auto* c_plan = app.add_subcommand("split-plan", "split and augmentation plan from per-class counts");
    c_plan->add_option("counts", counts_path, "CSV 'class,count' or JSON object")->required()->check(CLI::ExistingFile);
    c_plan->add_option("--out", plan_out, "plan JSON path");

    EvalOpts eval;
    auto* c_eval = app.add_subcommand("eval", "metrics report from predicted and true labels");
    c_eval->add_option("preds", eval.preds, "predicted labels, one per line")->required()->check(CLI::ExistingFile);
    c_eval->add_option("labels", eval.labels, "true labels, one per line")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--scores", eval.scores, "per-class probabilities CSV for AUC/AP")->check(CLI::ExistingFile);
    c_eval->add_option("--out", eval.out, "output prefix for .json and .csv");

    std::string bench_model, bench_out = "bench.json";
    std::size_t runs = 100, warmup = kMinBenchWarmup;
    auto* c_bench = app.add_subcommand("bench", "single-image latency benchmark");
    c_bench->add_option("model", bench_model, "weight container")->required();
    c_bench->add_option("--runs", runs, "measured runs (>= 30)");
    c_bench->add_option("--warmup", warmup, "untimed warmup runs (>= 10)");
    c_bench->add_option("--out", bench_out, "report JSON path");

    std::string profile_model, profile_out = "profile.json";
    auto* c_profile = app.add_subcommand("profile", "per-layer parameter and MAC counts");
    c_profile->add_option("model", profile_model, "weight container")->required();
    c_profile->add_option("--out", profile_out, "report JSON path");

    std::string ex_model, ex_image, ex_class, ex_out = "gradcam.png";
    auto* c_explain = app.add_subcommand("explain", "Grad-CAM overlay for one image");
    c_explain->add_option("model", ex_model, "weight container")->required();
    c_explain->add_option("image", ex_image, "JPEG or PNG")->required();
    c_explain->add_option("class", ex_class, "class name or index (default: predicted class)");
    c_explain->add_option("--out", ex_out, "overlay PNG path");

    ServeOpts serve;
    try {
        serve.port = std::stoi(env_or("PORT", "8080"));
    } catch (const std::exception&) {
        std::cerr << "usage error: PORT must be an integer\n";
        return 2;
    }
    auto* c_serve = app.add_subcommand("serve", "HTTP diagnosis service");
    c_serve->add_option("model", serve.model, "weight container (or MODEL_PATH)");
    c_serve->add_option("--port", serve.port, "listen port (or PORT)");
    c_serve->add_option("--host", serve.host, "bind address");
    c_serve->add_option("--reco-endpoint", serve.reco_endpoint, "remote recommendation endpoint (or RECO_ENDPOINT)");
    c_serve->add_option("--ui-dir", serve.ui_dir, "static web UI bundle")->check(CLI::ExistingDirectory);

    std::uint64_t init_seed = 0;
    std::size_t init_classes = kNumClasses;
    std::string init_out = "model.cnew";
    auto* c_init = app.add_subcommand("init-model", "write a seeded, randomly initialised container");
    c_init->add_option("--seed", init_seed, "initialisation seed");
    c_init->add_option("--classes", init_classes, "number of output classes");
    c_init->add_option("--out", init_out, "container path");

    std::string em_model, em_dir, em_out = "embeddings.csv";
    auto* c_embed = app.add_subcommand("embed", "export pooled features for a class-per-folder image set");
    c_embed->add_option("model", em_model, "weight container")->required();
    c_embed->add_option("dir", em_dir, "image root")->required()->check(CLI::ExistingDirectory);
    c_embed->add_option("--out", em_out, "CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*c_curate) return cmd_curate(curate);
        if (*c_plan) return cmd_split_plan(counts_path, plan_out);
        if (*c_eval) return cmd_eval(eval);
        if (*c_bench) return cmd_bench(bench_model, runs, warmup, bench_out);
        if (*c_profile) return cmd_profile(profile_model, profile_out);
        if (*c_explain) return cmd_explain(ex_model, ex_image, ex_class, ex_out);
        if (*c_serve) return cmd_serve(serve);
        if (*c_init) return cmd_init_model(init_seed, init_classes, init_out);
        if (*c_embed) return cmd_embed(em_model, em_dir, em_out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
