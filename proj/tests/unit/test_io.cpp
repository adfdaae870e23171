#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "polarforge/errors.hpp"
#include "polarforge/harness.hpp"
#include "polarforge/io.hpp"

using namespace polarforge;
namespace fs = std::filesystem;

namespace {

const fs::path kData = POLARFORGE_DATA_DIR;

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream o, e;
    const int c = run_pipeline(args, o, e);
    return {c, o.str(), e.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("polarforge_io_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string first_data_line(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') return line;
    return {};
}

}  // namespace

TEST_CASE("kernel files: parse, round trip, line-numbered errors") {
    const KernelPtr k = parse_kernel_text("2 2 an\n# comment\n1 0\n1 1\n");
    CHECK(k->distances() == std::vector<unsigned>{1, 2});
    std::ostringstream w;
    write_kernel_text(w, *k);
    CHECK(parse_kernel_text(w.str())->rows() == k->rows());
    for (const char* name : {"arikan", "rs4", "rs8", "arikan2"}) {
        std::ostringstream out;
        write_kernel_text(out, *builtin_kernel(name));
        CHECK(parse_kernel_text(out.str())->table().counts == builtin_kernel(name)->table().counts);
    }
    try {
        parse_kernel_text("2 2\n1 0\n1 x\n", "k.txt");
        FAIL("no throw");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("k.txt:3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_kernel_text("2 2\n1 1\n1 1\n"), ValidationError);  // singular
    CHECK_THROWS_AS(parse_kernel_text("2 2\n1 0\n"), ValidationError);       // short
    CHECK_THROWS_AS(parse_kernel_text("2 2\n1 0\n1 2\n"), ValidationError);  // not in GF(2)
    CHECK(builtin_kernel("nope") == nullptr);
    CHECK_THROWS(resolve_kernel("nope"));  // neither builtin nor a file
    CHECK(load_kernel_file(kData / "kernels/rs4.txt")->distances() == std::vector<unsigned>{1, 2, 3, 4});
}

TEST_CASE("recipes") {
    const Recipe r = parse_recipe_text("[channel]\n2 0.3\n[schedule]\n2 arikan\n1 arikan2\n", {});
    CHECK(r.depth() == 3);
    CHECK(r.levels().size() == 3);
    CHECK(r.channel().eps == 0.3);
    CHECK_FALSE(r.graft.has_value());
    CHECK(build_recipe(r).get().leaves().size() == 16);
    const Recipe m = load_recipe_file(kData / "recipes/mixed.recipe");
    CHECK(build_recipe(m).get().leaves().size() == 64);  // 2 * 2 * 4 * 2 * 2
    const Recipe g = load_recipe_file(kData / "recipes/graft_k2_n8.recipe");
    REQUIRE(g.graft.has_value());
    CHECK(g.graft->k == 2);
    CHECK_THROWS_AS(parse_recipe_text("[channel]\n2 1.5\n[schedule]\n1 arikan\n"), ValidationError);
    CHECK_THROWS_AS(parse_recipe_text("[channel]\n2 0.5\n"), ValidationError);
    CHECK_THROWS_AS(parse_recipe_text("[bogus]\n"), ValidationError);
    CHECK_THROWS_AS(parse_recipe_text("[channel]\n4 0.5\n[schedule]\n1 arikan\n"), ValidationError);
}

TEST_CASE("A.csv round trip and fmt_double") {
    CHECK(read_a_csv("leaf_id,ln_z\n5,-1\n3,-2\n") == std::vector<NodeId>{5, 3});
    CHECK_THROWS_AS(read_a_csv("leaf,ln_z\n"), ValidationError);
    CHECK_THROWS_AS(read_a_csv("leaf_id,ln_z\nx,1\n"), ValidationError);
    CHECK(fmt_double(0.25) == "0.25");
    CHECK(fmt_double(-0.0) == "0");
    CHECK(fmt_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("CLI: kernel analyze and write") {
    const Run r = run({"kernel", "analyze", "rs4"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.rfind(kernel_analysis_header() + "\n", 0) == 0);
    CHECK(r.out.find("1 2 3 4") != std::string::npos);
    const fs::path d = scratch("kernel");
    std::ofstream(d / "bad.txt") << "2 2\n1 0\n1 q\n";
    const Run bad = run({"kernel", "analyze", (d / "bad.txt").string()});
    CHECK(bad.code == kExitInvalid);
    CHECK(bad.err.find("bad.txt:3") != std::string::npos);
    CHECK(run({"kernel", "write", "rs8", "--out", (d / "rs8.txt").string()}).code == kExitOk);
    CHECK(load_kernel_file(d / "rs8.txt")->ell() == 8);
    CHECK(run({"nonsense"}).code == kExitInvalid);
    CHECK(run({"select", "--recipe", "x", "--mode", "bogus"}).code == kExitInvalid);
}

TEST_CASE("CLI: construct, select, simulate write stable CSVs") {
    const fs::path d = scratch("pipeline");
    const std::string recipe = (kData / "recipes/arikan_bec_n10.recipe").string();
    auto pipeline = [&](const std::string& tag) {
        const fs::path o = d / tag;
        fs::create_directories(o);
        REQUIRE(run({"--out-dir", o.string(), "construct", "--recipe", recipe}).code == kExitOk);
        REQUIRE(run({"--out-dir", o.string(), "select", "--recipe", recipe, "--mode", "threshold", "--ln-threshold", "-5"}).code == kExitOk);
        const Run s = run({"--out-dir", o.string(), "--seed", "3", "simulate", "--recipe", recipe, "--A", (o / "A.csv").string(), "--trials", "2000"});
        CHECK(s.code == kExitOk);
        return o;
    };
    const fs::path a = pipeline("a"), b = pipeline("b");
    for (const std::string f : {"tree.csv", "A.csv", "sim.csv"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(a / f));
        CHECK(read_text_file(a / f) == read_text_file(b / f));
    }
    CHECK(first_data_line(read_text_file(a / "tree.csv")) == "leaf_id,path_index,depth,ln_z,p");
    CHECK(first_data_line(read_text_file(a / "A.csv")) == "leaf_id,ln_z");
    CHECK(first_data_line(read_text_file(a / "sim.csv")) == "leaf_id,analytic_lnZ,empirical_rate,ci_low,ci_high");
    CHECK(read_text_file(a / "sim.csv").find("\nunion_bound,") != std::string::npos);
    // trial budget: N * trials over the limit is rejected
    CHECK(run({"--out-dir", a.string(), "--budget-trials", "100", "simulate", "--recipe", recipe, "--A", (a / "A.csv").string()}).code == kExitInvalid);
}

TEST_CASE("CLI: templates on recipes") {
    const fs::path d = scratch("templates");
    const std::string n16 = (kData / "recipes/arikan_bec_n16.recipe").string();
    CHECK(run({"--out-dir", d.string(), "select", "--recipe", n16, "--mode", "recyclable"}).code == kExitOk);
    CHECK(first_data_line(read_text_file(d / "diag.csv")) == "m,a,b,c,d,e,a0,e0,f,g");
    CHECK(run({"--out-dir", d.string(), "select", "--recipe", n16, "--mode", "disposable", "--beta-p", "0.02", "--inv-mu-p", "0.25"}).code == kExitOk);
    const Run inf = run({"--out-dir", d.string(), "select", "--recipe", n16, "--mode", "disposable", "--beta-p", "0.6", "--inv-mu-p", "0.2"});
    CHECK(inf.code == kExitInvalid);
    CHECK(inf.err.find("feasib") != std::string::npos);
    const std::string g = (kData / "recipes/graft_k2_n8.recipe").string();
    CHECK(run({"--out-dir", d.string(), "construct", "--recipe", g}).code == kExitOk);
    CHECK(run({"--out-dir", d.string(), "select", "--recipe", g, "--mode", "graft", "--beta-p", "0.05"}).code == kExitOk);
}

TEST_CASE("CLI: tradeoff and estimate-mu") {
    const fs::path d = scratch("tradeoff");
    const Run r = run({"--out-dir", d.string(), "tradeoff", "--preset", "arikan-bec", "--grid", "21", "--svg", "r.svg"});
    CHECK(r.code == kExitOk);
    CHECK(first_data_line(read_text_file(d / "region.csv")) == "label,beta_p,inv_mu_p,margin");
    CHECK(read_text_file(d / "r.svg").rfind("<svg", 0) == 0);
    CHECK(run({"--out-dir", d.string(), "tradeoff", "--kernel", "arikan"}).code == kExitInvalid);  // needs --mu-star
    CHECK(run({"--out-dir", d.string(), "tradeoff", "--kernel", "rs4", "--mu-star", "3.627", "--grid", "11"}).code == kExitOk);
    CHECK(run({"--out-dir", d.string(), "estimate-mu", "--kernel", "arikan", "--eps", "0.3,0.5", "--n-lo", "6", "--n-hi", "8"}).code == kExitOk);
    CHECK(first_data_line(read_text_file(d / "mu_star.csv")) == "eps,n,log_n,rate,gap,estimate");
}
