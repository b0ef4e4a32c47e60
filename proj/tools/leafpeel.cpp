#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "leafpeel/cli_io.hpp"
#include "leafpeel/error.hpp"
#include "leafpeel/forward_data.hpp"
#include "leafpeel/peel_dynamical.hpp"
#include "leafpeel/peel_spectral.hpp"
#include "leafpeel/reconstruct.hpp"

using namespace leafpeel;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0, kDataError = 2, kNumericFailure = 3, kVerifyFailure = 4;
constexpr const char* kDefaultGrid = "-20,20,4,0.5,4,4";

struct Args {
  std::string tree, input, other, out, root = "root", pipeline = "dynamical", sheaf;
  std::string lambda_grid = kDefaultGrid;
  double T = 0.0, dx = 0.01;
  double eps_time = -1.0, eps_coeff = -1.0, l2_rel = 0.02;
};

std::vector<std::string> split_labels(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string t; std::getline(in, t, ',');)
    if (!t.empty()) out.push_back(t);
  return out;
}

double or_default(double flag, double fallback) { return flag >= 0.0 ? flag : fallback; }

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

int cmd_synth(const Args& a) {
  const auto tree = io::read_tree(a.tree);
  const auto hash = io::tree_hash(tree);
  const auto R = response_matrix(tree, a.T, a.dx);
  io::write_response(R, {hash, "synth", {{"dx", a.dx}}}, fs::path(a.out) / "response");
  const auto M = tw_samples(tree, io::parse_lambda_grid(a.lambda_grid), true);
  io::write_tw(M, {hash, "synth", {}}, fs::path(a.out) / "tw");
  io::write_atomic(fs::path(a.out) / "tree.spec", io::serialize_tree(tree));
  std::cout << "wrote " << R.size() << "x" << R.size() << " response (" << R.samples() << " samples) and "
            << M.lambdas.size() << " TW samples to " << a.out << "\n";
  return kOk;
}

int cmd_tw(const Args& a) {
  const auto tree = io::read_tree(a.tree);
  const auto M = tw_samples(tree, io::parse_lambda_grid(a.lambda_grid), true);
  io::write_tw(M, {io::tree_hash(tree), "tw", {}}, a.out);
  std::size_t valid = 0;
  for (bool v : M.valid) valid += v;
  std::cout << valid << "/" << M.lambdas.size() << " lambda samples valid\n";
  return kOk;
}

std::size_t position(const std::vector<std::string>& labels, const std::string& l) {
  auto it = std::find(labels.begin(), labels.end(), l);
  if (it == labels.end()) fail(ErrorCode::UnknownVertex, "label '" + l + "' is not on the boundary");
  return static_cast<std::size_t>(it - labels.begin());
}

// Sheaf from the tree geometry, optionally the one with the given members.
std::pair<Sheaf, std::string> sheaf_from_tree(const MetricTree& tree, const std::vector<std::string>& labels,
                                              const std::string& wanted) {
  if (boundary_labels(tree, true) != labels)
    fail(ErrorCode::IncompatibleBundles, "tree boundary order differs from the bundle");
  const auto sheaves = enumerate_sheaves(tree);
  std::vector<std::size_t> want;
  for (const auto& l : split_labels(wanted)) want.push_back(position(labels, l));
  std::sort(want.begin(), want.end());
  for (const auto& s : sheaves)
    if (want.empty() || s.members == want) return {s, tree.vertices()[*s.center].label};
  fail(ErrorCode::NoCertifiedSheaf, want.empty() ? "tree has no sheaf" : "requested members are not a sheaf");
}

int cmd_peel(const Args& a) {
  json report;
  report["pipeline"] = a.pipeline;
  const fs::path out(a.out);
  if (a.pipeline == "spectral") {
    if (a.tree.empty()) fail(ErrorCode::ParseError, "the spectral pipeline needs --tree for the sheaf geometry");
    io::BundleInfo info;
    const auto M = io::read_tw(a.input, &info);
    const auto [sheaf, center] = sheaf_from_tree(io::read_tree(a.tree), M.labels, a.sheaf);
    PeelSpectralOptions opt;
    report["tolerances"] = {{"ode_tol", opt.transfer.tol}, {"consistency_tol", opt.consistency_tol},
                            {"singular_tol", opt.singular_tol}};
    const auto P = peel_tw(M, sheaf, center, opt);
    io::write_tw(P, {info.tree_hash, "peel", {{"ode_tol", opt.transfer.tol}}}, out / "tw");
    std::size_t valid = 0;
    for (bool v : P.valid) valid += v;
    report["center"] = center;
    report["labels"] = P.labels;
    report["valid_samples"] = valid;
    std::cout << "peeled sheaf at " << center << ": " << valid << "/" << P.lambdas.size() << " samples valid\n";
  } else {
    io::BundleInfo info;
    const auto R = io::read_response(a.input, &info);
    if (R.size() < 2) fail(ErrorCode::NoCertifiedSheaf, "a single boundary edge has no sheaf to peel");
    PeelDynamicalOptions opt;
    opt.eps_t = or_default(a.eps_time, opt.eps_t);
    opt.eps_c = or_default(a.eps_coeff, opt.eps_c);
    Sheaf sheaf;
    std::string center = "v1";
    if (!a.tree.empty()) {
      std::tie(sheaf, center) = sheaf_from_tree(io::read_tree(a.tree), R.labels, a.sheaf);
    } else if (!a.sheaf.empty()) {
      ReconstructOptions ro;
      const auto lengths = boundary_edge_lengths(R, ro);
      for (const auto& l : split_labels(a.sheaf)) sheaf.members.push_back(position(R.labels, l));
      std::sort(sheaf.members.begin(), sheaf.members.end());
      for (auto p : sheaf.members)
        sheaf.edges.push_back({lengths[p], potential_on_edge(R.at(p, p), lengths[p], ro).q.reversed(lengths[p])});
    } else {
      sheaf = detect_sheaf(R);
    }
    while (std::find(R.labels.begin(), R.labels.end(), center) != R.labels.end()) center += "_";
    const auto P = peel_response(R, sheaf, center, opt);
    io::write_response(P.matrix, {info.tree_hash, "peel", {{"eps_t", opt.eps_t}, {"eps_c", opt.eps_c}}},
                       out / "response");
    report["tolerances"] = {{"eps_t", opt.eps_t}, {"eps_c", opt.eps_c}, {"jump_tol", opt.jump_tol},
                            {"consistency_tol", opt.consistency_tol}};
    json members = json::array();
    for (auto p : sheaf.members) members.push_back(R.labels[p]);
    report["members"] = members;
    report["center"] = center;
    report["labels"] = P.matrix.labels;
    report["window"] = P.window;
    report["residual"] = P.residual;
    report["asymmetry"] = P.asymmetry;
    std::cout << "peeled sheaf {" << members.dump() << "} into " << center << ", window " << P.window
              << ", residual " << P.residual << "\n";
  }
  io::write_atomic(out / "report.json", report.dump(2) + "\n");
  return kOk;
}

int cmd_reconstruct(const Args& a) {
  if (a.pipeline != "dynamical") fail(ErrorCode::ParseError, "reconstruct runs on response bundles (--pipeline dynamical)");
  const auto R = io::read_response(a.input);
  ReconstructOptions opt;
  opt.eps_t = or_default(a.eps_time, opt.eps_t);
  opt.eps_c = or_default(a.eps_coeff, opt.eps_c);
  const auto rt = reconstruct_tree(R, a.root, opt);
  const fs::path out(a.out);
  io::write_tree(rt.tree, out / "tree.spec");
  std::string csv = "stage,from,to,length,length_residual,potential_residual\n";
  json edges = json::array();
  for (const auto& e : rt.edges) {
    csv += std::to_string(e.stage) + "," + e.from + "," + e.to + "," + num(e.length) + "," + num(e.length_residual) + "," +
           num(e.potential_residual) + "\n";
    edges.push_back({{"stage", e.stage}, {"from", e.from}, {"to", e.to}, {"length", e.length},
                     {"length_residual", e.length_residual}, {"potential_residual", e.potential_residual}});
  }
  io::write_atomic(out / "report.csv", csv);
  json report{{"stages", rt.stages},
              {"tree_hash", io::tree_hash(rt.tree)},
              {"tolerances",
               {{"eps_t", opt.eps_t}, {"eps_c", opt.eps_c}, {"degree_tol", opt.degree_tol}, {"cond_max", opt.cond_max}}},
              {"edges", edges}};
  io::write_atomic(out / "report.json", report.dump(2) + "\n");
  std::cout << "recovered " << rt.edges.size() << " edges in " << rt.stages << " stages\n";
  return kOk;
}

int cmd_verify(const Args& a) {
  const auto A = io::read_response(a.input);
  ResponseMatrix B;
  if (!a.tree.empty()) {
    B = response_matrix(io::read_tree(a.tree), A.horizon(), A.dx);
  } else {
    if (a.other.empty()) fail(ErrorCode::ParseError, "verify needs a second bundle or --tree");
    B = io::read_response(a.other);
  }
  io::VerifyOptions opt;
  opt.eps_time = or_default(a.eps_time, opt.eps_time);
  opt.eps_coeff = or_default(a.eps_coeff, opt.eps_coeff);
  opt.l2_rel = a.l2_rel;
  const auto rep = io::verify(A, B, opt);
  std::cout << rep.text();
  if (!a.out.empty()) io::write_atomic(a.out, rep.text());
  return rep.pass ? kOk : kVerifyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leaf peeling on metric trees"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kVersion));
  Args a;
  auto tol = [&](CLI::App* c) {
    c->add_option("--eps-time", a.eps_time, "Time tolerance");
    c->add_option("--eps-coeff", a.eps_coeff, "Coefficient tolerance");
  };

  auto* synth = app.add_subcommand("synth", "Response and TW bundles from a tree spec");
  synth->add_option("tree", a.tree, "Tree spec")->required()->check(CLI::ExistingFile);
  synth->add_option("--time-horizon", a.T, "T")->required();
  synth->add_option("--dx", a.dx, "Grid step");
  synth->add_option("--lambda-grid", a.lambda_grid, "re_min,re_max,n_re,im_min,im_max,n_im or a+bi;...");
  synth->add_option("--out", a.out, "Output directory")->required();

  auto* peel = app.add_subcommand("peel", "Peel one sheaf from a bundle");
  peel->add_option("bundle", a.input, "Response or TW bundle")->required()->check(CLI::ExistingDirectory);
  peel->add_option("--tree", a.tree, "Tree spec giving the sheaf geometry")->check(CLI::ExistingFile);
  peel->add_option("--sheaf", a.sheaf, "Comma separated member labels");
  peel->add_option("--pipeline", a.pipeline)->check(CLI::IsMember({"dynamical", "spectral"}));
  peel->add_option("--out", a.out, "Output directory")->required();
  tol(peel);

  auto* rec = app.add_subcommand("reconstruct", "Recover the tree from a reduced response bundle");
  rec->add_option("bundle", a.input, "Response bundle")->required()->check(CLI::ExistingDirectory);
  rec->add_option("--root", a.root, "Root label");
  rec->add_option("--pipeline", a.pipeline)->check(CLI::IsMember({"dynamical", "spectral"}));
  rec->add_option("--out", a.out, "Output directory")->required();
  tol(rec);

  auto* ver = app.add_subcommand("verify", "Compare two response bundles");
  ver->add_option("bundle", a.input, "Response bundle")->required()->check(CLI::ExistingDirectory);
  ver->add_option("other", a.other, "Response bundle")->check(CLI::ExistingDirectory);
  ver->add_option("--tree", a.tree, "Compare against data synthesized from this tree")->check(CLI::ExistingFile);
  ver->add_option("--l2-rel", a.l2_rel, "Relative L2 tolerance on regular parts");
  ver->add_option("--out", a.out, "Report file");
  tol(ver);

  auto* tw = app.add_subcommand("tw", "TW matrix on a lambda grid");
  tw->add_option("tree", a.tree, "Tree spec")->required()->check(CLI::ExistingFile);
  tw->add_option("--lambda-grid", a.lambda_grid, "re_min,re_max,n_re,im_min,im_max,n_im or a+bi;...");
  tw->add_option("--out", a.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kDataError;
  }

  try {
    if (*synth) return cmd_synth(a);
    if (*peel) return cmd_peel(a);
    if (*rec) return cmd_reconstruct(a);
    if (*ver) return cmd_verify(a);
    if (*tw) return cmd_tw(a);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_data_error(e.code()) ? kDataError : kNumericFailure;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kDataError;
}
