// funlag: verify / bounds / auc front end.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "funlag/errors.hpp"
#include "funlag/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const json& j, const fs::path& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw funlag::ParseError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

funlag::Box load_box(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw funlag::ParseError("cannot open box file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
    const auto lo = doc.at("lo").get<std::vector<double>>();
    const auto hi = doc.at("hi").get<std::vector<double>>();
    if (lo.size() != hi.size()) throw funlag::ShapeError("box lo/hi sizes differ");
    return funlag::Box(Eigen::Map<const funlag::Vec>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                       Eigen::Map<const funlag::Vec>(hi.data(), static_cast<Eigen::Index>(hi.size())));
  } catch (const json::exception& e) {
    throw funlag::ParseError("box file " + path.string() + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional-Lagrangian verification of (stochastic) neural networks"};
  app.require_subcommand(1);

  funlag::RunConfig rc;
  std::string family = "linear";
  auto* verify = app.add_subcommand("verify", "optimize multipliers and emit a certificate");
  verify->add_option("--model", rc.model, "model JSON")->required();
  verify->add_option("--spec", rc.spec, "spec JSON")->required();
  verify->add_option("--family", family, "multiplier family")
      ->check(CLI::IsMember({"linear", "linexp", "quadratic"}));
  verify->add_option("--steps", rc.steps, "optimizer steps");
  verify->add_option("--lr", rc.lr, "initial learning rate");
  verify->add_option("--decay-every", rc.decay_every, "divide the learning rate by 10 every N steps");
  verify->add_option("--certify-every", rc.certify_every, "certify every N steps");
  verify->add_option("--grid-n", rc.grid_n, "softmax partition size");
  verify->add_option("--exact-cap", rc.exact_cap, "largest class count for exhaustive softmax");
  verify->add_option("--seed", rc.seed, "random seed");
  verify->add_option("--threads", rc.threads, "worker threads");
  verify->add_option("--attack-samples", rc.attack_samples, "inputs sampled for an attack score (0 = off)");
  verify->add_option("--out", rc.out, "certificate path");

  fs::path bounds_model, bounds_spec, bounds_box, bounds_out = "-";
  auto* bounds = app.add_subcommand("bounds", "dump interval bounds of every layer");
  bounds->add_option("--model", bounds_model, "model JSON")->required();
  auto* spec_opt = bounds->add_option("--spec", bounds_spec, "spec JSON providing the input box");
  auto* box_opt = bounds->add_option("--box", bounds_box, "JSON file {\"lo\": [...], \"hi\": [...]}");
  spec_opt->excludes(box_opt);
  bounds->add_option("--out", bounds_out, "output path (default stdout)");

  fs::path id_scores, ood_dir, auc_out = "-";
  auto* auc = app.add_subcommand("auc", "guaranteed / adversarial AUC from OOD certificates");
  auc->add_option("--id-scores", id_scores, "JSON array of in-distribution scores")->required();
  auc->add_option("--ood-dir", ood_dir, "directory of OOD certificates")->required();
  auc->add_option("--out", auc_out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*verify) {
      rc.family = funlag::family_from_string(family);
      const auto net = funlag::load_model(rc.model);
      const auto spec = funlag::load_spec_config(rc.spec);
      const auto r = funlag::run_verification(net, spec, rc);
      write_json(r.certificate, rc.out);
      std::printf("%s: bound %.6g, threshold %.6g, %zu subproblem%s\n",
                  r.verified ? "verified" : "not verified", r.bound, r.threshold, r.subproblems,
                  r.subproblems == 1 ? "" : "s");
      return r.verified ? 0 : 1;
    }
    if (*bounds) {
      const auto net = funlag::load_model(bounds_model);
      funlag::Box box;
      if (!bounds_spec.empty()) {
        const auto spec = funlag::load_spec_config(bounds_spec);
        const auto problems = funlag::build_problem(net, spec);
        box = problems.front().input.support();
      } else if (!bounds_box.empty()) {
        box = load_box(bounds_box);
      } else {
        throw funlag::ConfigError("bounds needs --spec or --box");
      }
      write_json(funlag::bounds_json(funlag::propagate_intervals(net, box)), bounds_out);
      return 0;
    }
    if (*auc) {
      const auto ids = funlag::load_scores(id_scores);
      if (!fs::is_directory(ood_dir)) throw funlag::ParseError("not a directory: " + ood_dir.string());
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(ood_dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      std::vector<json> certs;
      for (const auto& f : files) {
        std::ifstream in(f);
        try {
          certs.push_back(json::parse(in));
        } catch (const json::exception& e) {
          throw funlag::ParseError(f.string() + ": " + e.what());
        }
      }
      const auto rep = funlag::auc_from_certificates(ids, certs);
      json out{{"gauc", rep.gauc},
               {"aauc", rep.aauc ? json(*rep.aauc) : json(nullptr)},
               {"n_id", rep.n_id},
               {"n_ood", rep.n_ood}};
      write_json(out, auc_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
