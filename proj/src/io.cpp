#include "polarforge/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "polarforge/errors.hpp"

namespace polarforge {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) { return trim(s.substr(0, s.find('#'))); }

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& what) {
    throw ValidationError(source + ":" + std::to_string(line) + ": " + what);
}

std::uint64_t parse_uint(const std::string& tok, const std::string& source, std::size_t line, const char* what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        fail_at(source, line, std::string("expected a nonnegative integer ") + what + ", got '" + tok + "'");
    return v;
}

double parse_real(const std::string& tok, const std::string& source, std::size_t line, const char* what) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        fail_at(source, line, std::string("expected a real ") + what + ", got '" + tok + "'");
    return v;
}

struct Line {
    std::size_t no;
    std::string text;
};

std::vector<Line> content_lines(const std::string& text) {
    std::vector<Line> out;
    std::istringstream in(text);
    std::size_t no = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++no;
        const std::string t = strip_comment(raw);
        if (!t.empty()) out.push_back({no, t});
    }
    return out;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

KernelPtr parse_kernel_text(const std::string& text, const std::string& source) {
    const auto lines = content_lines(text);
    if (lines.empty()) throw ValidationError(source + ": empty kernel file");
    const auto head = split_ws(lines[0].text);
    if (head.size() < 2) fail_at(source, lines[0].no, "header must be 'q ell name'");
    const auto q = parse_uint(head[0], source, lines[0].no, "q");
    const auto ell = parse_uint(head[1], source, lines[0].no, "ell");
    std::string name = head.size() > 2 ? head[2] : "kernel";
    for (std::size_t i = 3; i < head.size(); ++i) name += " " + head[i];
    if (q < 2 || q > Field::kMaxSize) fail_at(source, lines[0].no, "q out of range");
    if (ell < 2) fail_at(source, lines[0].no, "ell must be >= 2");
    if (ell > kMaxEnumerableEll)
        throw BudgetError(source + ":" + std::to_string(lines[0].no) + ": ell = " + std::to_string(ell) +
                          " exceeds the enumeration limit " + std::to_string(kMaxEnumerableEll));
    FieldPtr field;
    try {
        field = Field::of_size(static_cast<std::uint32_t>(q));
    } catch (const std::exception& e) {
        fail_at(source, lines[0].no, e.what());
    }
    if (lines.size() - 1 != ell)
        fail_at(source, lines.back().no,
                "expected " + std::to_string(ell) + " rows, found " + std::to_string(lines.size() - 1));
    std::vector<std::vector<Element>> rows;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto toks = split_ws(lines[r].text);
        if (toks.size() != ell)
            fail_at(source, lines[r].no, "row has " + std::to_string(toks.size()) + " entries, expected " +
                                             std::to_string(ell));
        std::vector<Element> row;
        for (const auto& t : toks) {
            const auto v = parse_uint(t, source, lines[r].no, "field element");
            if (v >= q) fail_at(source, lines[r].no, "entry " + t + " is not an element of GF(" + head[0] + ")");
            row.push_back(static_cast<Element>(v));
        }
        rows.push_back(std::move(row));
    }
    try {
        return kernel_load(field, rows, name);
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
}

KernelPtr load_kernel_file(const std::filesystem::path& path) {
    return parse_kernel_text(read_text_file(path), path.string());
}

void write_kernel_text(std::ostream& out, const Kernel& k) {
    out << k.field()->q() << ' ' << k.ell() << ' ' << k.name() << '\n';
    for (std::size_t i = 0; i < k.ell(); ++i) {
        const auto row = k.rows().row(i);
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << row[j];
        out << '\n';
    }
}

KernelPtr builtin_kernel(const std::string& name) {
    static const std::map<std::string, KernelPtr> table = [] {
        std::map<std::string, KernelPtr> t;
        t["arikan"] = arikan_kernel();
        t["rs4"] = rs_kernel(Field::of_size(4));
        t["rs8"] = rs_kernel(Field::of_size(8));
        t["arikan2"] = kronecker_kernel(*arikan_kernel(), *arikan_kernel());
        return t;
    }();
    const auto it = table.find(name);
    return it == table.end() ? nullptr : it->second;
}

KernelPtr resolve_kernel(const std::string& name_or_path, const std::filesystem::path& base) {
    if (auto k = builtin_kernel(name_or_path)) return k;
    std::filesystem::path p(name_or_path);
    if (p.is_relative() && !base.empty()) p = base / p;
    return load_kernel_file(p);
}

ErasureChannel Recipe::channel() const { return qec_make(Field::of_size(q), eps); }

unsigned Recipe::depth() const {
    unsigned d = 0;
    for (const auto& [n, k] : schedule) d += n;
    return d;
}

std::vector<KernelPtr> Recipe::levels() const {
    std::vector<KernelPtr> out;
    for (const auto& [n, k] : schedule)
        for (unsigned i = 0; i < n; ++i) out.push_back(k);
    return out;
}

Recipe parse_recipe_text(const std::string& text, const std::filesystem::path& base, const std::string& source) {
    Recipe r;
    std::string section;
    bool have_channel = false;
    for (const auto& [no, t] : content_lines(text)) {
        if (t.front() == '[') {
            if (t.back() != ']') fail_at(source, no, "unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section != "channel" && section != "schedule" && section != "graft")
                fail_at(source, no, "unknown section [" + section + "]");
            continue;
        }
        const auto toks = split_ws(t);
        auto kernel_of = [&](const std::string& tok) {
            try {
                return resolve_kernel(tok, base);
            } catch (const std::exception& e) {
                fail_at(source, no, std::string("kernel '") + tok + "': " + e.what());
            }
        };
        if (section == "channel") {
            if (toks.size() != 2) fail_at(source, no, "channel line must be 'q eps'");
            r.q = static_cast<std::uint32_t>(parse_uint(toks[0], source, no, "q"));
            r.eps = parse_real(toks[1], source, no, "eps");
            if (!(r.eps >= 0.0 && r.eps <= 1.0)) fail_at(source, no, "eps must lie in [0,1]");
            try {
                Field::of_size(r.q);
            } catch (const std::exception& e) {
                fail_at(source, no, e.what());
            }
            have_channel = true;
        } else if (section == "schedule") {
            if (toks.size() != 2) fail_at(source, no, "schedule line must be 'depth kernel'");
            const auto d = parse_uint(toks[0], source, no, "depth");
            if (d > 64) fail_at(source, no, "depth too large");
            r.schedule.push_back({static_cast<unsigned>(d), kernel_of(toks[1])});
        } else if (section == "graft") {
            if (toks.size() != 5) fail_at(source, no, "graft line must be 'k n mu_star_rat mu_prime err-kernel'");
            GraftSpec g;
            g.k = static_cast<unsigned>(parse_uint(toks[0], source, no, "k"));
            g.n = static_cast<unsigned>(parse_uint(toks[1], source, no, "n"));
            g.mu_star_rat = parse_real(toks[2], source, no, "mu_star_rat");
            g.mu_p = parse_real(toks[3], source, no, "mu_prime");
            if (g.k < 1 || g.n < 1 || !(g.mu_star_rat > 0) || !(g.mu_p > 0))
                fail_at(source, no, "graft parameters must be positive");
            g.err = kernel_of(toks[4]);
            r.graft = g;
        } else {
            fail_at(source, no, "content outside a section");
        }
    }
    if (!have_channel) throw ValidationError(source + ": missing [channel] section");
    if (r.schedule.empty()) throw ValidationError(source + ": missing [schedule] section");
    for (const auto& [d, k] : r.schedule)
        if (k->field()->q() != r.q)
            throw ValidationError(source + ": kernel " + k->name() + " is over GF(" + std::to_string(k->field()->q()) +
                                  ") but the channel is over GF(" + std::to_string(r.q) + ")");
    return r;
}

Recipe load_recipe_file(const std::filesystem::path& path) {
    return parse_recipe_text(read_text_file(path), path.parent_path(), path.string());
}

BuiltTree build_recipe(const Recipe& r, std::size_t node_budget) {
    BuiltTree b;
    const ErasureChannel w = r.channel();
    if (r.graft) {
        const auto lv = r.levels();
        for (const auto& k : lv)
            if (k != lv.front())
                throw ValidationError("a grafted recipe needs a single stock kernel in [schedule]");
        if (r.depth() != r.graft->n)
            throw ValidationError("[schedule] depth " + std::to_string(r.depth()) + " differs from graft n " +
                                  std::to_string(r.graft->n));
        b.grafted = build_grafted_tree(w, lv.front(), r.graft->err, r.graft->k, r.graft->n, r.graft->mu_star_rat,
                                       r.graft->mu_p, node_budget);
    } else {
        b.plain = multi_tree(w, r.levels(), node_budget);
    }
    return b;
}

const std::vector<Preset>& presets() {
    static const std::vector<Preset> table = {
        {"arikan-bec", "arikan", 3.627, "mu* = 3.627 for Arikan's kernel on the BEC [FV14]"},
        {"arikan-bdmc", "arikan", 4.714, "mu* = 4.714 for Arikan's kernel on BDMCs [MHU16], [FT17]"},
    };
    return table;
}

const Preset& find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (p.name == name) return p;
    std::string known;
    for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
    throw ValidationError("unknown preset '" + name + "' (known: " + known + ")");
}

void write_metadata(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta) {
    for (const auto& [k, v] : meta) out << "# " << k << ": " << v << '\n';
}

void write_a_csv(std::ostream& out, const ChannelTree& tree, const std::vector<NodeId>& a,
                 const std::vector<std::pair<std::string, std::string>>& meta) {
    write_metadata(out, meta);
    out << "leaf_id,ln_z\n";
    for (NodeId v : a) out << v << ',' << fmt_double(tree.node(v).ln_z) << '\n';
}

std::vector<NodeId> read_a_csv(const std::string& text, const std::string& source) {
    std::vector<NodeId> out;
    std::istringstream in(text);
    std::size_t no = 0;
    bool header = false;
    for (std::string raw; std::getline(in, raw);) {
        ++no;
        const std::string t = trim(raw);
        if (t.empty() || t.front() == '#') continue;
        const auto cells = split_csv(t);
        if (!header) {
            if (cells.empty() || cells[0] != "leaf_id") fail_at(source, no, "expected header 'leaf_id,ln_z'");
            header = true;
            continue;
        }
        const auto v = parse_uint(cells[0], source, no, "leaf id");
        if (v >= kNoNode) fail_at(source, no, "leaf id out of range");
        out.push_back(static_cast<NodeId>(v));
    }
    if (!header) throw ValidationError(source + ": missing header 'leaf_id,ln_z'");
    return out;
}

void write_diag_csv(std::ostream& out, const SelectionDiagnostics& d,
                    const std::vector<std::pair<std::string, std::string>>& meta) {
    write_metadata(out, meta);
    out << "# unit: " << d.unit << '\n';
    for (const auto& n : d.notes) out << "# note: " << n << '\n';
    out << "m,a,b,c,d,e,a0,e0,f,g\n";
    for (const auto& r : d.rounds)
        out << r.m << ',' << r.a << ',' << r.b << ',' << r.c << ',' << r.d << ',' << r.e << ',' << r.a0 << ',' << r.e0
            << ',' << fmt_double(r.f) << ',' << fmt_double(r.g) << '\n';
}

void write_tree_csv(std::ostream& out, const ChannelTree& tree,
                    const std::vector<std::pair<std::string, std::string>>& meta) {
    write_metadata(out, meta);
    out << "leaf_id,path_index,depth,ln_z,p\n";
    std::size_t idx = 0;
    for (NodeId v : tree.leaves()) {
        out << v << ',' << idx++ << ',' << tree.node(v).depth << ',' << fmt_double(tree.node(v).ln_z) << ",1/"
            << inverse_prob(tree, v) << '\n';
    }
}

void write_sim_csv(std::ostream& out, const ChannelTree&, const SimReport& r,
                   const std::vector<std::pair<std::string, std::string>>& meta) {
    write_metadata(out, meta);
    out << "leaf_id,analytic_lnZ,empirical_rate,ci_low,ci_high\n";
    for (const auto& s : r.leaves)
        out << s.leaf << ',' << fmt_double(s.ln_predicted) << ',' << fmt_double(s.rate) << ','
            << fmt_double(s.ci_lo) << ',' << fmt_double(s.ci_hi) << '\n';
    out << "bler," << fmt_double(r.bler) << ",,,\n";
    out << "bler_ci," << fmt_double(r.bler_ci_lo) << ',' << fmt_double(r.bler_ci_hi) << ",,\n";
    out << "union_bound," << fmt_double(r.union_bound) << ",,,\n";
}

}  // namespace polarforge
