#pragma once

// unbalance-lab command line. run_cli() is the whole program minus main() so
// tests can drive it in-process.

#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "unbalance/unbalance.hpp"

namespace unbalance::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, parse_error = 2, metric_error = 3, empty_band = 4, solver_error = 5 };

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::PositiveSequenceZero:
        case ErrorKind::DegenerateTriple:
        case ErrorKind::NotRealizable: return metric_error;
        case ErrorKind::EmptyBand: return empty_band;
        case ErrorKind::NonConvergence:
        case ErrorKind::CollapsedVoltage: return solver_error;
        default: return parse_error;
    }
}

inline std::string sha256_hex(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(ErrorKind::ParseError, "cannot read " + file.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        fail(ErrorKind::InvalidArgument, "sha256 failed for " + file.string());
    }
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

/// File name to SHA-256 for every file the feeder was read from.
inline std::vector<std::pair<std::string, std::string>> feeder_hashes(const fs::path& feeder) {
    std::vector<std::pair<std::string, std::string>> out;
    if (fs::is_directory(feeder)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(feeder)) {
            if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.emplace_back(f.filename().string(), sha256_hex(f));
    } else {
        out.emplace_back(feeder.filename().string(), sha256_hex(feeder));
    }
    return out;
}

inline std::string provenance_line(const std::optional<fs::path>& feeder) {
    if (!feeder) return "provenance: no feeder files used";
    std::string line = "provenance: feeder " + feeder->filename().string() + " sha256";
    for (const auto& [name, hash] : feeder_hashes(*feeder)) line += " " + name + "=" + hash;
    return line;
}

inline ojson hashes_json(const fs::path& feeder) {
    ojson j = ojson::object();
    for (const auto& [name, hash] : feeder_hashes(feeder)) j[name] = hash;
    return j;
}

inline ojson read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ParseError, "cannot open " + path.string());
    try {
        return ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

/// Phasor file: three non-comment lines "magnitude angle_deg" (comma or
/// whitespace separated) for phases a, b, c.
inline PhasorTriple read_phasor_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ParseError, "cannot open " + path.string());
    std::vector<Phasor> p;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::string s = t;
        std::replace(s.begin(), s.end(), ',', ' ');
        std::istringstream fields(s);
        std::string mag, ang, extra;
        fields >> mag >> ang;
        if (ang.empty() || (fields >> extra)) {
            fail(ErrorKind::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected 'magnitude angle'");
        }
        auto num = [&](const std::string& tok) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size()) {
                fail(ErrorKind::ParseError, path.string() + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
            }
            return v;
        };
        p.emplace_back(num(mag), num(ang));
    }
    if (p.size() != 3) fail(ErrorKind::ParseError, path.string() + ": expected 3 phasors, found " + std::to_string(p.size()));
    return {p[0], p[1], p[2]};
}

struct StudyItem {
    ScenarioSpec spec;
    PVSpec pv;
    std::string pv_label;
};

/// Every scenario of a study file solved with and without its PV fleet.
/// Paths inside the study file are relative to the file.
inline ojson run_study(const fs::path& study_file, const std::optional<fs::path>& feeder_override,
                       std::optional<BusSelection> buses_override) {
    const ojson study = read_json_file(study_file);
    const fs::path root = study_file.parent_path();
    try {
        const fs::path feeder = feeder_override ? *feeder_override : root / study.at("feeder").get<std::string>();
        const FeederModel model = load_model(feeder);
        BusSelection sel = study.value("buses", std::string("representative")) == "all" ? BusSelection::All
                                                                                      : BusSelection::Representative;
        if (buses_override) sel = *buses_override;

        std::vector<StudyItem> items;
        for (const auto& s : study.at("scenarios")) {
            StudyItem it{scenario_from_json(read_json_file(root / s.at("scenario").get<std::string>())), {}, {}};
            if (s.contains("pv")) {
                it.pv_label = s.at("pv").get<std::string>();
                it.pv = pv_from_json(read_json_file(root / it.pv_label), model);
            }
            items.push_back(std::move(it));
        }

        std::vector<std::optional<Comparison>> results(items.size());
        parallel_for(items.size(), [&](std::size_t i) {
            results[i] = compare_before_after(model, items[i].spec, items[i].pv, sel);
        });

        ojson out{{"schema", "unbalance-lab/study"},
                  {"version", 1},
                  {"feeder", {{"name", feeder.filename().string()}, {"sha256", hashes_json(feeder)}}},
                  {"buses", sel == BusSelection::All ? "all" : "representative"}};
        ojson scen = ojson::array();
        for (std::size_t i = 0; i < items.size(); ++i) {
            ojson j = to_json(*results[i]);
            j["spec"] = to_json(items[i].spec);
            j["pv"] = to_json(items[i].pv);
            scen.push_back(std::move(j));
        }
        out["scenarios"] = std::move(scen);
        return out;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, study_file.string() + ": " + e.what());
    }
}

inline int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Voltage unbalance indices, their bounds, and feeder scenario studies", "unbalance-lab"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string format = "table";
    OutputFormat fmt;
    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json", "table"}));
    app.add_option("--precision", fmt.precision, "Decimal places for csv and table output (0-12)")
        ->check(CLI::Range(0, 12));
    app.add_flag("--full-precision", fmt.full_precision, "Print every significant digit in csv and table output");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "All five indices of one phasor triple");
    std::vector<double> mags, angles{0.0, -120.0, 120.0};
    std::string phasor_file;
    auto* mag_opt = metrics->add_option("--mag", mags, "Phase magnitudes a b c")->expected(3);
    metrics->add_option("--angle", angles, "Phase angles a b c in degrees")->expected(3)->needs(mag_opt);
    metrics->add_option("--input", phasor_file, "Phasor file: three lines of 'magnitude angle_deg'")
        ->excludes(mag_opt)
        ->check(CLI::ExistingFile);

    // bounds
    auto* bounds = app.add_subcommand("bounds", "Ratio of each index to VUF over a VUF band");
    std::vector<std::vector<double>> band_args;
    EnvelopeBox box;
    int resolution = 25;
    bool refine = true;
    bounds->add_option("--band", band_args, "VUF band LO HI in percent (repeatable)")->expected(2)->allow_extra_args(false);
    bounds->add_option("--mag-lo", box.mag_lo, "Lowest phase magnitude, p.u.");
    bounds->add_option("--mag-hi", box.mag_hi, "Highest phase magnitude, p.u.");
    bounds->add_option("--angle-dev", box.angle_dev, "Largest angle deviation from nominal, degrees");
    bounds->add_option("--resolution", resolution, "Grid points per dimension");
    bounds->add_flag("--refine,!--no-refine", refine, "Polish grid extrema by pattern search (default on)");

    // run
    auto* run = app.add_subcommand("run", "Solve one scenario on a feeder and report indices per bus");
    std::string feeder_path, scenario_path, pv_path, buses = "representative", csv_table = "buses";
    bool compare_pv = false, verbose = false;
    run->add_option("--feeder", feeder_path, "Feeder directory or canonical JSON")->required()->check(CLI::ExistingPath);
    run->add_option("--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--pv", pv_path, "PV fleet JSON")->check(CLI::ExistingFile);
    run->add_option("--buses", buses, "Buses to report")->check(CLI::IsMember({"representative", "all"}));
    run->add_flag("--compare-pv", compare_pv, "Solve with and without the PV fleet and report the change");
    run->add_option("--csv-table", csv_table, "Table to emit in csv format")
        ->check(CLI::IsMember({"buses", "summary", "deltas"}));
    run->add_flag("--verbose", verbose, "Log solver iterations to stderr");

    // study
    auto* study = app.add_subcommand("study", "Every scenario of a study file, with and without PV");
    std::string study_path, study_feeder, study_buses;
    study->add_option("--study", study_path, "Study JSON")->required()->check(CLI::ExistingFile);
    study->add_option("--feeder", study_feeder, "Override the feeder named in the study")->check(CLI::ExistingPath);
    study->add_option("--buses", study_buses, "Override the bus selection")->check(CLI::IsMember({"representative", "all"}));

    // feeder
    auto* feeder_cmd = app.add_subcommand("feeder", "Validate a feeder and print its canonical JSON");
    std::string feeder_in;
    feeder_cmd->add_option("--feeder", feeder_in, "Feeder directory or canonical JSON")->required()->check(CLI::ExistingPath);

    try {
        std::vector<std::string> reversed(argv.rbegin(), argv.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream help;
        const int code = app.exit(e, help, err);
        out << help.str();
        return code == 0 ? ok : parse_error;
    }
    fmt.kind = *parse_format_kind(format);

    try {
        fmt.validate();
        if (*metrics) {
            std::optional<PhasorTriple> v;
            if (!phasor_file.empty()) {
                v = read_phasor_file(phasor_file);
            } else {
                require(mags.size() == 3, "metrics needs --mag A B C or --input FILE");
                v = PhasorTriple(Phasor(mags[0], angles[0]), Phasor(mags[1], angles[1]), Phasor(mags[2], angles[2]));
            }
            write_metrics(out, compute_all(*v), fmt);
            if (fmt.kind == FormatKind::Table) out << provenance_line(std::nullopt) << '\n';
            return ok;
        }

        if (*bounds) {
            std::vector<VufBand> bands;
            for (const auto& b : band_args) bands.push_back({b.at(0), b.at(1)});
            if (bands.empty()) bands.push_back(VufBand{});
            box.validate();
            const auto cells = band_report(bands, box, resolution, refine);
            write_bounds(out, cells, fmt);
            if (fmt.kind == FormatKind::Table) out << provenance_line(std::nullopt) << '\n';
            for (const auto& c : cells) {
                if (!c.result) {
                    err << "error: " << c.error << '\n';
                    return empty_band;
                }
            }
            return ok;
        }

        if (*run) {
            const FeederModel model = load_model(feeder_path);
            const ScenarioSpec spec = scenario_from_json(read_json_file(scenario_path));
            std::optional<PVSpec> pv;
            if (!pv_path.empty()) pv = pv_from_json(read_json_file(pv_path), model);
            const BusSelection sel = buses == "all" ? BusSelection::All : BusSelection::Representative;
            SolveOptions opts;
            if (verbose) {
                opts.on_iteration = [&err](int it, double dv) {
                    err << "sweep " << it << ": max |dV| = " << dv << " p.u.\n";
                };
            }
            const ojson header{{"feeder", {{"name", fs::path(feeder_path).filename().string()}, {"sha256", hashes_json(feeder_path)}}},
                               {"spec", to_json(spec)},
                               {"pv", pv ? to_json(*pv) : ojson(nullptr)},
                               {"buses", buses}};

            if (compare_pv) {
                const Comparison c = compare_before_after(model, spec, pv.value_or(PVSpec{}), sel, opts);
                if (fmt.kind == FormatKind::Json) {
                    ojson j = header;
                    j.update(to_json(c));
                    out << j.dump(2) << '\n';
                } else if (fmt.kind == FormatKind::Csv) {
                    if (csv_table == "buses") {
                        write_bus_rows(out, c.after.report, fmt);
                    } else if (csv_table == "summary") {
                        write_summary(out, c.after.summary, fmt);
                    } else {
                        write_deltas(out, c, fmt);
                    }
                } else {
                    out << "scenario " << spec.name << " without PV\n";
                    write_summary(out, c.before.summary, fmt);
                    out << "\nscenario " << spec.name << " with PV\n";
                    write_summary(out, c.after.summary, fmt);
                    out << "\nchange after PV (negative = closer to VUF)\n";
                    write_deltas(out, c, fmt);
                    out << provenance_line(fs::path(feeder_path)) << '\n';
                }
                return ok;
            }

            const ScenarioRun r = run_scenario(model, spec, pv, sel, opts);
            if (fmt.kind == FormatKind::Json) {
                ojson j = header;
                j.update(to_json(r));
                out << j.dump(2) << '\n';
            } else if (fmt.kind == FormatKind::Csv) {
                if (csv_table == "summary") {
                    write_summary(out, r.summary, fmt);
                } else {
                    require(csv_table == "buses", "--csv-table deltas needs --compare-pv");
                    write_bus_rows(out, r.report, fmt);
                }
            } else {
                out << "scenario " << spec.name << ": " << r.solution.iterations << " sweeps, max residual "
                    << format_number(r.solution.max_residual_kva, {FormatKind::Table, 9, false}) << " kVA\n";
                write_bus_rows(out, r.report, fmt);
                out << '\n';
                write_summary(out, r.summary, fmt);
                out << provenance_line(fs::path(feeder_path)) << '\n';
            }
            for (const auto& row : r.report.rows) {
                if (!row.diagnostic.empty()) err << "bus " << row.bus << ": " << row.diagnostic << '\n';
            }
            return ok;
        }

        if (*study) {
            std::optional<BusSelection> sel;
            if (!study_buses.empty()) sel = study_buses == "all" ? BusSelection::All : BusSelection::Representative;
            const ojson j = run_study(study_path, study_feeder.empty() ? std::nullopt : std::optional<fs::path>(study_feeder), sel);
            if (fmt.kind == FormatKind::Json) {
                out << j.dump(2) << '\n';
                return ok;
            }
            TextTable t;
            const bool csv = fmt.kind == FormatKind::Csv;
            std::vector<std::string> head{"scenario", "leg", "mean_VUF"};
            for (IndexKind k : relative_indices) head.push_back("mean_err_" + std::string(to_string(k)));
            if (csv) {
                write_csv_row(out, head);
            } else {
                t.add(head);
            }
            for (const auto& s : j.at("scenarios")) {
                for (const char* leg : {"without_pv", "with_pv"}) {
                    const auto& sum = s.at(leg).at("summary");
                    std::vector<std::string> row{s.at("scenario").get<std::string>(), leg,
                                                 format_number(sum.at("values").at("VUF").at("mean").get<double>(), fmt)};
                    for (IndexKind k : relative_indices) {
                        row.push_back(format_number(sum.at("abs_error").at(std::string(to_string(k))).at("mean").get<double>(), fmt));
                    }
                    if (csv) {
                        write_csv_row(out, row);
                    } else {
                        t.add(std::move(row));
                    }
                }
            }
            if (!csv) {
                t.write(out);
                const fs::path f = study_feeder.empty()
                                       ? fs::path(study_path).parent_path() / read_json_file(study_path).at("feeder").get<std::string>()
                                       : fs::path(study_feeder);
                out << provenance_line(f) << '\n';
            }
            return ok;
        }

        if (*feeder_cmd) {
            const FeederModel model = load_model(feeder_in);
            if (fmt.kind == FormatKind::Json) {
                out << to_json(model).dump(2) << '\n';
                return ok;
            }
            const auto line = main_line(model);
            const auto rep = representative_buses(model);
            TextTable t;
            t.add({"quantity", "value"});
            t.add({"buses", std::to_string(model.bus_count())});
            t.add({"segments", std::to_string(model.segments().size())});
            t.add({"loads", std::to_string(model.loads().size())});
            t.add({"source bus", model.bus_id(model.root())});
            t.add({"main line buses", std::to_string(line.size())});
            t.add({"main line length m", format_number(model.cumulative_length_m(line.back()), fmt)});
            std::string ids;
            for (std::size_t b : rep.buses) ids += (ids.empty() ? "" : " ") + model.bus_id(b);
            t.add({"representative buses", ids});
            if (fmt.kind == FormatKind::Csv) {
                out << "quantity,value\n";
                write_csv_row(out, {"buses", std::to_string(model.bus_count())});
                write_csv_row(out, {"segments", std::to_string(model.segments().size())});
                write_csv_row(out, {"loads", std::to_string(model.loads().size())});
                write_csv_row(out, {"representative_buses", ids});
            } else {
                t.write(out);
                if (rep.degenerate) out << "warning: fewer than 9 distinct representative buses\n";
                out << provenance_line(fs::path(feeder_in)) << '\n';
            }
            return ok;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return parse_error;
    }
    return parse_error;
}

}  // namespace unbalance::cli
