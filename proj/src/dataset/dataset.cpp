#include "mrgen/dataset.hpp"

#include "mrgen/errors.hpp"
#include "mrgen/parallel.hpp"
#include "mrgen/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace mrgen {

using ordered_json = nlohmann::ordered_json;

bool is_known_method_token(std::string_view token) {
    if (token.starts_with("external:")) return token.size() > 9;
    return std::any_of(kAllMethods.begin(), kAllMethods.end(), [&](Method m) { return to_string(m) == token; });
}

std::vector<std::size_t> FoldSplit::fold(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == f) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldSplit::complement(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != f) out.push_back(i);
    return out;
}

double spearman(const Permutation& a, const Permutation& b) {
    if (a.size() != b.size()) throw DimensionError("spearman: size mismatch");
    const auto n = a.size();
    if (n < 2) return 1.0;
    const auto pa = a.positions(), pb = b.positions();
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = double(pa[i]) - double(pb[i]);
        sq += diff * diff;
    }
    const double nn = double(n);
    return 1.0 - 6.0 * sq / (nn * (nn * nn - 1.0));
}

Permutation reference_ordering(const Graph& g) {
    if (g.node_count() < 2) return Permutation::identity(g.node_count());
    return spectral_order(shortest_path_distances(g), false);
}

std::pair<Permutation, bool> canonicalize_reversal(const Permutation& p, const Permutation& ref) {
    auto rev = p.reversed();
    if (spearman(rev, ref) > spearman(p, ref)) return {std::move(rev), true};
    return {p, false};
}

std::uint64_t matrix_hash(const AdjacencyMatrix& a) {
    std::string packed((a.cells().size() + 7) / 8, '\0');
    for (std::size_t i = 0; i < a.cells().size(); ++i)
        if (a.cells()[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
    return fnv1a(packed);
}

Dataset dedup(const Graph& g, std::vector<ReorderingRecord> records) {
    const auto a = adjacency(g);
    Dataset out;
    out.graph_digest = g.digest();
    out.n = g.node_count();
    out.graph_name = g.name();
    out.unique = true;

    std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen; // hash -> kept indices
    std::vector<AdjacencyMatrix> kept_matrices;
    for (auto& rec : records) {
        if (rec.order.size() != out.n) throw DimensionError("record order does not match graph size");
        auto m = reorder(a, rec.order);
        auto& bucket = seen[matrix_hash(m)];
        const bool duplicate = std::any_of(bucket.begin(), bucket.end(), [&](std::size_t idx) {
            return matrices_equal(kept_matrices[idx], m);
        });
        if (duplicate) continue;
        bucket.push_back(kept_matrices.size());
        kept_matrices.push_back(std::move(m));
        out.records.push_back(std::move(rec));
    }
    return out;
}

Permutation initial_ordering(std::size_t n, std::uint64_t seed) {
    Rng rng(Rng::mix(seed) ^ 0x5eed5eed5eed5eedULL);
    return Permutation(rng.permutation(n));
}

namespace {

std::size_t distance_rank(const DistanceSpec& spec) {
    const auto all = all_distance_specs();
    return static_cast<std::size_t>(std::find(all.begin(), all.end(), spec) - all.begin());
}

std::size_t method_rank(Method m) {
    return static_cast<std::size_t>(std::find(kAllMethods.begin(), kAllMethods.end(), m) - kAllMethods.begin());
}

} // namespace

Dataset build_dataset(const Graph& g, const std::vector<Method>& methods, const std::vector<DistanceSpec>& distances,
                      const std::vector<std::uint64_t>& seeds, BuildReport* report, std::size_t workers) {
    if (methods.empty() || distances.empty() || seeds.empty()) {
        throw ValidationError("build_dataset needs at least one method, distance and seed");
    }
    const auto n = g.node_count();

    struct Job {
        std::size_t distance;
        Method method;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t di = 0; di < distances.size(); ++di)
        for (auto m : methods)
            for (auto s : seeds) jobs.push_back({di, m, s});
    std::sort(jobs.begin(), jobs.end(), [&](const Job& x, const Job& y) {
        return std::tuple(distance_rank(distances[x.distance]), method_rank(x.method), x.seed) <
               std::tuple(distance_rank(distances[y.distance]), method_rank(y.method), y.seed);
    });

    const std::size_t pool = workers == 0 ? default_workers() : workers;
    std::vector<DistanceMatrix> matrices(distances.size());
    parallel_for(distances.size(), pool, [&](std::size_t i) { matrices[i] = distance_matrix(g, distances[i]); });

    std::vector<Permutation> initial;
    for (auto s : seeds) initial.push_back(initial_ordering(n, s));
    auto initial_for = [&](std::uint64_t s) -> const Permutation& {
        return initial[static_cast<std::size_t>(std::find(seeds.begin(), seeds.end(), s) - seeds.begin())];
    };

    const auto ref = reference_ordering(g);
    std::vector<std::optional<ReorderingRecord>> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), pool, [&](std::size_t i) {
        const auto& job = jobs[i];
        try {
            const auto& start = initial_for(job.seed);
            const auto local = run_method(matrices[job.distance].permuted(start), {job.method, job.seed});
            auto [order, reversed] = canonicalize_reversal(compose(start, local), ref);
            results[i] = ReorderingRecord{std::move(order), std::string(to_string(job.method)),
                                          distances[job.distance], job.seed, reversed};
        } catch (const std::exception& e) {
            errors[i] = distances[job.distance].token() + "/" + std::string(to_string(job.method)) + "/" +
                        std::to_string(job.seed) + ": " + e.what();
        }
    });

    std::vector<ReorderingRecord> raw;
    BuildReport local_report;
    local_report.jobs = jobs.size();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (results[i]) {
            raw.push_back(std::move(*results[i]));
        } else {
            local_report.failures.push_back(errors[i]);
        }
    }
    local_report.raw_records = raw.size();
    if (report) *report = local_report;
    if (raw.empty()) {
        throw Error("every reordering job failed; first error: " + local_report.failures.front());
    }
    return dedup(g, std::move(raw));
}

FoldSplit split_folds(const Dataset& dataset, std::size_t k, std::uint64_t trial_seed) {
    if (!dataset.unique) throw ValidationError("folds require a deduplicated dataset");
    if (k == 0 || k > dataset.size()) {
        throw ValidationError("cannot split " + std::to_string(dataset.size()) + " records into " +
                              std::to_string(k) + " folds");
    }
    Rng rng(trial_seed);
    const auto shuffled = rng.permutation(dataset.size());
    FoldSplit split{k, std::vector<std::size_t>(dataset.size()), trial_seed};
    for (std::size_t pos = 0; pos < shuffled.size(); ++pos) split.assignment[shuffled[pos]] = pos % k;
    return split;
}

Dataset subsample(const Dataset& dataset, std::size_t count, std::uint64_t seed) {
    if (count > dataset.size()) {
        throw ValidationError("cannot take " + std::to_string(count) + " of " + std::to_string(dataset.size()) +
                              " records");
    }
    Rng rng(seed);
    auto idx = rng.permutation(dataset.size());
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    Dataset out = dataset;
    out.records.clear();
    for (auto i : idx) out.records.push_back(dataset.records[i]);
    return out;
}

std::string to_jsonl(const Dataset& dataset) {
    std::string out;
    ordered_json header;
    header["schema"] = Dataset::kSchemaVersion;
    header["graph"] = dataset.graph_name;
    header["graph_digest"] = hex_digest(dataset.graph_digest);
    header["n"] = dataset.n;
    header["unique"] = dataset.unique;
    header["records"] = dataset.records.size();
    out += header.dump();
    out += '\n';
    for (const auto& r : dataset.records) {
        ordered_json line;
        line["method"] = r.method;
        line["distance"] = std::string(to_string(r.distance.metric));
        if (r.distance.metric == Metric::ShortestPath) {
            line["variant"] = nullptr;
        } else {
            line["variant"] = std::string(to_string(r.distance.variant));
        }
        line["seed"] = r.seed;
        line["reversed"] = r.reversed;
        line["order"] = r.order.order();
        out += line.dump();
        out += '\n';
    }
    return out;
}

Dataset parse_jsonl(std::string_view text) {
    Dataset dataset;
    std::size_t line_no = 0;
    bool have_header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        try {
            if (!have_header) {
                if (j.at("schema").get<int>() != Dataset::kSchemaVersion) {
                    throw ParseError(line_no, "unsupported dataset schema");
                }
                dataset.graph_name = j.value("graph", std::string{});
                dataset.graph_digest = parse_hex_digest(j.at("graph_digest").get<std::string>());
                dataset.n = j.at("n").get<std::size_t>();
                dataset.unique = j.at("unique").get<bool>();
                have_header = true;
                continue;
            }
            ReorderingRecord r;
            r.method = j.at("method").get<std::string>();
            if (!is_known_method_token(r.method)) throw ParseError(line_no, "unknown method '" + r.method + "'");
            r.distance.metric = parse_metric(j.at("distance").get<std::string>());
            if (r.distance.metric != Metric::ShortestPath) {
                r.distance.variant = parse_variant(j.at("variant").get<std::string>());
            }
            r.seed = j.at("seed").get<std::uint64_t>();
            r.reversed = j.at("reversed").get<bool>();
            r.order = Permutation(j.at("order").get<std::vector<std::size_t>>());
            if (r.order.size() != dataset.n) throw ParseError(line_no, "order length does not match n");
            dataset.records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    if (!have_header) throw ParseError(line_no, "missing dataset header");
    return dataset;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << to_jsonl(dataset);
    if (!out) throw Error("failed writing '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dataset '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_jsonl(buf.str());
}

void check_dataset_matches(const Dataset& dataset, const Graph& g) {
    if (dataset.graph_digest != g.digest() || dataset.n != g.node_count()) {
        throw ValidationError("dataset digest " + hex_digest(dataset.graph_digest) + " does not match graph " +
                              hex_digest(g.digest()));
    }
}

std::vector<AdjacencyMatrix> reordered_matrices(const Graph& g, const Dataset& dataset) {
    const auto a = adjacency(g);
    std::vector<AdjacencyMatrix> out;
    out.reserve(dataset.size());
    for (const auto& r : dataset.records) out.push_back(reorder(a, r.order));
    return out;
}

} // namespace mrgen
