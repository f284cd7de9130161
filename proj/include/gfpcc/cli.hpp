#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gfpcc/checkpoint.hpp"
#include "gfpcc/config.hpp"
#include "gfpcc/data.hpp"
#include "gfpcc/error.hpp"
#include "gfpcc/federated.hpp"
#include "gfpcc/harness.hpp"

namespace gfpcc {

enum class Subcommand { ingest, federate, simulate, report };

struct CliInvocation {
    Subcommand command = Subcommand::simulate;
    std::string config_path;
    std::vector<std::string> overrides;  // key=value, applied after the file
    std::string out_dir = "out";
    std::optional<std::size_t> jobs;
    std::string input;  // report: results CSV; default <out>/results.csv
    RunConfig config;   // resolved
};

inline std::string_view subcommand_name(Subcommand s) {
    switch (s) {
        case Subcommand::ingest: return "ingest";
        case Subcommand::federate: return "federate";
        case Subcommand::simulate: return "simulate";
        case Subcommand::report: return "report";
    }
    return "?";
}

// Command-line syntax problems (missing subcommand, unknown flag).
class UsageError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Thrown by parse_args when --help was requested; carries the text.
struct HelpRequested {
    std::string text;
};

namespace detail {

inline std::string exit_code_help() {
    return "exit codes:\n"
           "  0 success\n"
           "  1 unexpected failure\n"
           "  2 usage or config error\n"
           "  3 malformed or missing data\n"
           "  4 training diverged\n"
           "  5 aggregation failed\n"
           "  6 file I/O error\n";
}

struct AppSpec {
    CLI::App app{"Federated proactive caching simulator", "gfpcc"};
    CliInvocation inv;
    CLI::App* sub[4] = {};
    std::size_t jobs = 0;
};

inline void build_app(AppSpec& s) {
    auto& app = s.app;
    app.require_subcommand(1);
    app.footer("config keys (set in --config files as 'key = value' or with --set key=value):\n" + config_help() +
               "\nenvironment:\n  " + kDataRootEnv + "  directory holding the rating file when data.path is empty\n\n" +
               exit_code_help());
    const char* about[4] = {
        "parse the rating file and write a canonical dump plus id maps",
        "train the federated model for the first seed; write checkpoint, round log and recommendation pool",
        "run the cache-size sweep for every policy and seed; write results.csv",
        "print a mean +- stddev table from a results CSV",
    };
    for (int k = 0; k < 4; ++k) {
        auto* sub = app.add_subcommand(std::string(subcommand_name(static_cast<Subcommand>(k))), about[k]);
        sub->add_option("-c,--config", s.inv.config_path, "config file (key = value lines)");
        sub->add_option("-s,--set", s.inv.overrides, "override a config key, key=value (repeatable)");
        sub->add_option("-o,--out", s.inv.out_dir, "output directory")->capture_default_str();
        sub->add_option("-j,--jobs", s.jobs, "worker threads (overrides run.jobs)");
        if (k == static_cast<int>(Subcommand::report)) {
            sub->add_option("-i,--input", s.inv.input, "results CSV (default <out>/results.csv)");
        }
        s.sub[k] = sub;
    }
}

}  // namespace detail

inline std::string usage_text() {
    detail::AppSpec s;
    detail::build_app(s);
    return s.app.help();
}

// Parses argv and resolves the config (defaults < file < --set). Throws
// ConfigError on any usage problem and HelpRequested for --help.
inline CliInvocation parse_args(int argc, const char* const* argv) {
    detail::AppSpec s;
    detail::build_app(s);
    try {
        s.app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::string text = s.app.help();
        for (auto* sub : s.sub) {
            if (sub->parsed()) text = sub->help();
        }
        throw HelpRequested{text};
    } catch (const CLI::CallForAllHelp&) {
        throw HelpRequested{s.app.help("", CLI::AppFormatMode::All)};
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    for (int k = 0; k < 4; ++k) {
        if (s.sub[k]->parsed()) s.inv.command = static_cast<Subcommand>(k);
    }
    auto& cfg = s.inv.config;
    if (!s.inv.config_path.empty()) apply_config_file(cfg, s.inv.config_path);
    for (const auto& o : s.inv.overrides) apply_override(cfg, o);
    if (s.jobs > 0) s.inv.jobs = s.jobs;
    if (s.inv.jobs) cfg.exp.jobs = *s.inv.jobs;
    resolve_config(cfg);
    return s.inv;
}

// FNV-1a 64 over a file's bytes, as 16 hex digits.
inline std::string file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "' for checksum");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize k = 0; k < in.gcount(); ++k) {
            h ^= static_cast<unsigned char>(buf[k]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

namespace detail {

inline std::filesystem::path ensure_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
    std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    return out;
}

inline void close_out(std::ofstream& out, const std::filesystem::path& p) {
    out.close();
    if (!out) throw IoError("error while writing '" + p.string() + "'");
}

inline Dataset load_for(const RunConfig& cfg) {
    if (cfg.exp.data_path.empty()) {
        throw ConfigError(std::string("missing dataset path: set data.path or ") + kDataRootEnv);
    }
    return load_ratings(cfg.exp.data_path, cfg.exp.format);
}

// The manifest is itself a valid config file: the resolved keys plus the
// artifacts as comments. Rerunning with --config <manifest> reproduces them.
inline void write_manifest(const std::filesystem::path& dir, const CliInvocation& inv,
                           const std::vector<std::filesystem::path>& artifacts) {
    auto path = dir / "manifest.cfg";
    auto out = open_out(path);
    out << "# gfpcc run manifest\n";
    out << "# command: " << subcommand_name(inv.command) << '\n';
    if (!inv.input.empty()) out << "# input: " << inv.input << " fnv1a64=" << file_checksum(inv.input) << '\n';
    for (const auto& a : artifacts) {
        out << "# artifact: " << a.filename().string() << " fnv1a64=" << file_checksum(a)
            << " bytes=" << std::filesystem::file_size(a) << '\n';
    }
    write_config(inv.config, out);
    close_out(out, path);
}

inline int do_ingest(const CliInvocation& inv, std::ostream& out) {
    auto ds = load_for(inv.config);
    auto dir = ensure_dir(inv.out_dir);
    std::vector<std::filesystem::path> files = {dir / "canonical.csv", dir / "users.csv", dir / "items.csv"};
    {
        auto f = open_out(files[0]);
        write_canonical(ds, f);
        close_out(f, files[0]);
    }
    {
        auto f = open_out(files[1]);
        write_id_map(ds.users, f);
        close_out(f, files[1]);
    }
    {
        auto f = open_out(files[2]);
        write_id_map(ds.items, f);
        close_out(f, files[2]);
    }
    write_manifest(dir, inv, files);
    out << "ingested " << ds.events.size() << " events, " << ds.num_users << " users, " << ds.num_items
        << " items -> " << files[0].string() << '\n';
    return 0;
}

inline int do_federate(const CliInvocation& inv, std::ostream& out, std::ostream& log) {
    const auto& exp = inv.config.exp;
    auto ds = load_for(inv.config);
    auto split = split_chronological(ds, exp.train_fraction);
    auto clients = make_clients(split.train, ds.num_users, ds.num_items, exp.users_per_client);
    FederationOptions opt;
    opt.seed = exp.seeds.front();
    opt.m_list = exp.resolved_list_size();
    opt.jobs = exp.jobs;
    opt.on_round = [&](const RoundLog& r, const ModelParams&) {
        log << "round " << r.round + 1 << "/" << exp.agg.global_epochs << ": " << r.clients.size() << " clients, "
            << r.failed << " dropped, mean loss " << r.mean_loss << ", |w| " << r.param_norm << '\n';
    };
    auto fed = run_federation(clients, exp.train, exp.agg, opt);

    auto dir = ensure_dir(inv.out_dir);
    std::vector<std::filesystem::path> files = {dir / "checkpoint.bin", dir / "rounds.csv", dir / "pool.csv"};
    {
        auto f = open_out(files[0], true);
        write_checkpoint(fed.global, f);
        close_out(f, files[0]);
    }
    {
        auto f = open_out(files[1]);
        write_round_log(fed.rounds, f);
        close_out(f, files[1]);
    }
    {
        // One row per accepted client of the last round: position,items (';' joined).
        auto f = open_out(files[2]);
        f << "list,items\n";
        for (std::size_t k = 0; k < fed.pool.size(); ++k) {
            f << k << ',';
            for (std::size_t j = 0; j < fed.pool[k].size(); ++j) f << (j ? ";" : "") << fed.pool[k][j];
            f << '\n';
        }
        close_out(f, files[2]);
    }
    write_manifest(dir, inv, files);
    out << "federated " << clients.size() << " clients for " << exp.agg.global_epochs << " rounds (seed "
        << exp.seeds.front() << ") -> " << files[0].string() << '\n';
    return 0;
}

inline int do_simulate(const CliInvocation& inv, std::ostream& out) {
    auto ds = load_for(inv.config);
    auto dir = ensure_dir(inv.out_dir);
    auto path = dir / "results.csv";
    std::vector<ResultRow> partial;
    std::vector<ResultRow> rows;
    try {
        rows = run_experiment(inv.config.exp, ds, &partial);
    } catch (...) {
        auto f = open_out(path);
        write_results_csv(partial, f, inv.config.timing);
        close_out(f, path);
        throw;
    }
    auto f = open_out(path);
    write_results_csv(rows, f, inv.config.timing);
    close_out(f, path);
    write_manifest(dir, inv, {path});
    write_table(summarize(rows), out);
    return 0;
}

inline int do_report(CliInvocation inv, std::ostream& out) {
    if (inv.input.empty()) inv.input = (std::filesystem::path(inv.out_dir) / "results.csv").string();
    std::ifstream in(inv.input);
    if (!in) throw IoError("cannot open results file '" + inv.input + "'");
    auto rows = read_results_csv(in);
    auto summary = summarize(rows);
    write_table(summary, out);
    auto dir = ensure_dir(inv.out_dir);
    auto path = dir / "report.txt";
    auto f = open_out(path);
    write_table(summary, f);
    close_out(f, path);
    write_manifest(dir, inv, {path});
    return 0;
}

}  // namespace detail

inline int run_cli(const CliInvocation& inv, std::ostream& out, std::ostream& log) {
    log << "# resolved config (" << subcommand_name(inv.command) << ")\n";
    write_config(inv.config, log);
    switch (inv.command) {
        case Subcommand::ingest: return detail::do_ingest(inv, out);
        case Subcommand::federate: return detail::do_federate(inv, out, log);
        case Subcommand::simulate: return detail::do_simulate(inv, out);
        case Subcommand::report: return detail::do_report(inv, out);
    }
    return 1;
}

// Whole program: parse, run, map errors to exit codes.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CliInvocation inv;
    try {
        inv = parse_args(argc, argv);
    } catch (const HelpRequested& h) {
        out << h.text;
        return 0;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << usage_text();
        return static_cast<int>(e.code());
    } catch (const Error& e) {
        err << "error: " << e.what() << "\nrun 'gfpcc --help' for config keys and usage\n";
        return static_cast<int>(e.code());
    }
    try {
        return run_cli(inv, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::failure);
    }
}

}  // namespace gfpcc
