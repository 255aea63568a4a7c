#include "q2pc/mbqc.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace q2pc::mbqc {

namespace {

bool precedes(Site a, Site b) { return a.col < b.col || (a.col == b.col && a.row < b.row); }

} // namespace

void Pattern::validate() const {
    if (n == 0 || m < 1) throw std::invalid_argument("pattern needs at least one row and one column");
    if (n > 8) throw std::invalid_argument("pattern has more rows than the dense budget allows");
    if (input_rows != n) throw std::invalid_argument("every row must carry an input qubit");
    if (phi.size() != n) throw std::invalid_argument("angle matrix has the wrong number of rows");
    for (const auto &row : phi) {
        if (row.size() != m) throw std::invalid_argument("angle matrix has the wrong number of columns");
        if (row.back() != Angle8(0)) throw std::invalid_argument("output column angles must be 0");
    }
    for (const auto &e : vertical) {
        if (e.row + 1 >= n || e.col == 0 || e.col > m) throw std::invalid_argument("vertical edge out of range");
    }
    if (deps.size() != n) throw std::invalid_argument("dependency table has the wrong number of rows");
    for (std::size_t i = 0; i < n; ++i) {
        if (deps[i].size() != m + 1) throw std::invalid_argument("dependency table has the wrong number of columns");
        for (std::size_t j = 0; j <= m; ++j) {
            for (const auto *list : {&deps[i][j].x, &deps[i][j].z}) {
                for (const Site &d : *list) {
                    if (d.row >= n || d.col >= m) throw std::invalid_argument("dependency on an unmeasured site");
                    if (!precedes(d, Site{i, j})) {
                        throw std::invalid_argument("dependency " + to_string(d) + " does not precede " +
                                                    to_string(Site{i, j}));
                    }
                }
            }
        }
    }
}

std::vector<std::vector<Dependencies>> flow_dependencies(std::size_t n, std::size_t m,
                                                         const std::vector<VerticalEdge> &vertical) {
    std::vector<std::vector<Dependencies>> deps(n, std::vector<Dependencies>(m + 1));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            deps[i][j].x.push_back({i, j - 1});
            if (j >= 2) deps[i][j].z.push_back({i, j - 2});
            for (const auto &e : vertical) {
                if (e.col != j) continue;
                if (e.row == i) deps[i][j].z.push_back({i + 1, j - 1});
                if (e.row + 1 == i) deps[i][j].z.push_back({e.row, j - 1});
            }
        }
    }
    return deps;
}

Pattern make_pattern(std::string name, std::vector<std::vector<Angle8>> phi, std::vector<VerticalEdge> vertical) {
    Pattern p;
    p.name = std::move(name);
    p.n = phi.size();
    p.m = phi.empty() ? 0 : phi.front().size();
    p.phi = std::move(phi);
    p.vertical = std::move(vertical);
    p.deps = flow_dependencies(p.n, p.m, p.vertical);
    p.input_rows = p.n;
    p.validate();
    return p;
}

Angle8 compute_phi_prime(Angle8 phi, int sx, int sz) { return (sx & 1 ? -phi : phi) + Angle8(4 * (sz & 1)); }

Angle8 compute_delta(Angle8 phi_prime, Angle8 theta, int r) { return phi_prime + theta + Angle8(4 * (r & 1)); }

OutcomeBoard::OutcomeBoard(std::size_t n, std::size_t m)
    : n_(n), m_(m), corrected_(n * (m + 1)), raw_(n * (m + 1)) {}

void OutcomeBoard::record(Site s, int raw, int mask) {
    if (s.row >= n_ || s.col > m_) throw std::out_of_range("site outside the board");
    raw_[s.row * (m_ + 1) + s.col] = raw & 1;
    corrected_[s.row * (m_ + 1) + s.col] = (raw ^ mask) & 1;
}

std::optional<int> OutcomeBoard::corrected(Site s) const {
    if (s.row >= n_ || s.col > m_) throw std::out_of_range("site outside the board");
    return corrected_[s.row * (m_ + 1) + s.col];
}

std::optional<int> OutcomeBoard::raw(Site s) const {
    if (s.row >= n_ || s.col > m_) throw std::out_of_range("site outside the board");
    return raw_[s.row * (m_ + 1) + s.col];
}

namespace {

int xor_over(const OutcomeBoard &board, const std::vector<Site> &sites, bool use_raw) {
    int acc = 0;
    for (const Site &d : sites) {
        const auto v = use_raw ? board.raw(d) : board.corrected(d);
        if (!v) throw std::logic_error("dependency " + to_string(d) + " not yet measured");
        acc ^= *v;
    }
    return acc;
}

} // namespace

Corrections accumulate_dependencies(const OutcomeBoard &board, const Pattern &pattern, Site site) {
    const auto &d = pattern.dependencies(site);
    return {xor_over(board, d.x, false), xor_over(board, d.z, false)};
}

int raw_x_dependency(const OutcomeBoard &board, const Pattern &pattern, Site site) {
    return xor_over(board, pattern.dependencies(site).x, true);
}

qsim::Bits reference_evaluate(const Pattern &pattern, const qsim::StateVector &input, qsim::OutcomeSource &outcomes) {
    pattern.validate();
    const std::size_t n = pattern.n;
    if (input.num_qubits() != n) throw std::invalid_argument("input state must have one qubit per row");
    OutcomeBoard board(n, pattern.m);
    qsim::StateVector state = input;
    qsim::StateVector fresh = qsim::StateVector::plus_state();
    for (std::size_t i = 1; i < n; ++i) fresh = fresh.tensor(qsim::StateVector::plus_state());
    for (std::size_t j = 1; j <= pattern.m; ++j) {
        // Column j-1 occupies qubits 0..n-1, column j qubits n..2n-1.
        state = state.tensor(fresh);
        for (std::size_t i = 0; i < n; ++i) state.cz(i, n + i);
        for (const auto &e : pattern.vertical) {
            if (e.col == j) state.cz(n + e.row, n + e.row + 1);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Site s{i, j - 1};
            const Corrections c = accumulate_dependencies(board, pattern, s);
            const Angle8 angle = compute_phi_prime(pattern.angle(s), c.sx, c.sz);
            board.record(s, qsim::measure_in_plane_inplace(state, 0, angle, outcomes), 0);
        }
    }
    qsim::Bits out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Site s{i, pattern.m};
        const int sx = accumulate_dependencies(board, pattern, s).sx;
        out[i] = static_cast<std::uint8_t>(qsim::measure_z_inplace(state, 0, outcomes) ^ sx);
    }
    return out;
}

Law reference_distribution(const Pattern &pattern, const qsim::StateVector &input) {
    const auto leaves = qsim::explore_branches<qsim::Bits>(
        [&](qsim::OutcomeSource &src) { return reference_evaluate(pattern, input, src); });
    Law law;
    for (const auto &leaf : leaves) law[leaf.result] += leaf.probability;
    return law;
}

namespace library {

Pattern identity() { return make_pattern("identity", {{Angle8(0), Angle8(0)}}); }

Pattern rx_teleport(Angle8 phi) { return make_pattern("rx-teleport", {{phi, Angle8(0)}}); }

Pattern hadamard() { return make_pattern("hadamard", {{Angle8(0), Angle8(0), Angle8(0)}}); }

Pattern rz(Angle8 phi) { return make_pattern("rz", {{Angle8(0), phi, Angle8(0)}}); }

Pattern brick(const std::vector<std::vector<Angle8>> &angles) {
    if (angles.size() != 2 || angles[0].size() != 3 || angles[1].size() != 3) {
        throw std::invalid_argument("brick takes a 2 x 3 angle matrix");
    }
    std::vector<std::vector<Angle8>> phi = angles;
    for (auto &row : phi) row.push_back(Angle8(0));
    return make_pattern("brick", std::move(phi), {{0, 1}, {0, 3}});
}

Pattern bit_flips(const std::vector<std::uint8_t> &bits) {
    std::vector<std::vector<Angle8>> phi;
    for (auto b : bits) phi.push_back({Angle8(4 * (b & 1)), Angle8(0)});
    return make_pattern("bit-flips", std::move(phi));
}

} // namespace library

Pattern library_pattern(std::string_view name) {
    if (name == "identity") return library::identity();
    if (name == "rx-teleport") return library::rx_teleport(Angle8(2));
    if (name == "hadamard") return library::hadamard();
    if (name == "rz") return library::rz(Angle8(1));
    if (name == "brick") return library::brick({{Angle8(1), Angle8(2), Angle8(0)}, {Angle8(3), Angle8(0), Angle8(6)}});
    throw std::invalid_argument("unknown library pattern '" + std::string(name) + "'");
}

std::vector<std::string> library_names() { return {"identity", "rx-teleport", "hadamard", "rz", "brick"}; }

namespace {

nlohmann::ordered_json sites_to_json(const std::vector<Site> &sites) {
    auto arr = nlohmann::ordered_json::array();
    for (const Site &s : sites) arr.push_back({s.row, s.col});
    return arr;
}

std::vector<Site> sites_from_json(const nlohmann::json &arr) {
    std::vector<Site> out;
    for (const auto &s : arr) {
        if (!s.is_array() || s.size() != 2) throw std::invalid_argument("site must be [row, col]");
        out.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
    }
    return out;
}

} // namespace

std::string to_json(const Pattern &p) {
    nlohmann::ordered_json j;
    j["format"] = "q2pc-pattern/1";
    j["name"] = p.name;
    j["rows"] = p.n;
    j["cols"] = p.m;
    j["input_rows"] = p.input_rows;
    auto angles = nlohmann::ordered_json::array();
    for (const auto &row : p.phi) {
        auto r = nlohmann::ordered_json::array();
        for (Angle8 a : row) r.push_back(a.value());
        angles.push_back(r);
    }
    j["angles"] = angles;
    auto vertical = nlohmann::ordered_json::array();
    for (const auto &e : p.vertical) vertical.push_back({e.row, e.col});
    j["vertical_edges"] = vertical;
    auto deps = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < p.n; ++i) {
        for (std::size_t c = 0; c <= p.m; ++c) {
            nlohmann::ordered_json d;
            d["site"] = {i, c};
            d["x"] = sites_to_json(p.deps[i][c].x);
            d["z"] = sites_to_json(p.deps[i][c].z);
            deps.push_back(d);
        }
    }
    j["dependencies"] = deps;
    return j.dump(2) + "\n";
}

Pattern from_json(std::string_view text) {
    Pattern p;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "q2pc-pattern/1") throw std::invalid_argument("unsupported pattern format");
        p.name = j.value("name", std::string("unnamed"));
        p.n = j.at("rows").get<std::size_t>();
        p.m = j.at("cols").get<std::size_t>();
        p.input_rows = j.at("input_rows").get<std::size_t>();
        for (const auto &row : j.at("angles")) {
            std::vector<Angle8> r;
            for (const auto &a : row) {
                const int v = a.get<int>();
                if (v < 0 || v > 7) throw std::invalid_argument("angle must be an integer in 0..7");
                r.push_back(Angle8(v));
            }
            p.phi.push_back(std::move(r));
        }
        for (const auto &e : j.at("vertical_edges")) {
            if (!e.is_array() || e.size() != 2) throw std::invalid_argument("vertical edge must be [row, col]");
            p.vertical.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
        }
        if (p.n > 64 || p.m > 64) throw std::invalid_argument("pattern dimensions out of range");
        p.deps.assign(p.n, std::vector<Dependencies>(p.m + 1));
        std::vector<std::vector<bool>> seen(p.n, std::vector<bool>(p.m + 1, false));
        for (const auto &d : j.at("dependencies")) {
            const auto site = sites_from_json(nlohmann::json::array({d.at("site")})).front();
            if (site.row >= p.n || site.col > p.m) throw std::invalid_argument("dependency entry for a site outside the grid");
            if (seen[site.row][site.col]) throw std::invalid_argument("duplicate dependency entry");
            seen[site.row][site.col] = true;
            p.deps[site.row][site.col] = {sites_from_json(d.at("x")), sites_from_json(d.at("z"))};
        }
        for (const auto &row : seen) {
            for (bool b : row) {
                if (!b) throw std::invalid_argument("missing dependency entry");
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw std::invalid_argument(std::string("pattern json: ") + e.what());
    }
    p.validate();
    return p;
}

Pattern load_pattern(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read pattern file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void save_pattern(const Pattern &p, const std::string &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write pattern file " + path);
    out << to_json(p);
}

} // namespace q2pc::mbqc
