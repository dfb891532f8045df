// SPDX-License-Identifier: Apache-2.0
// `tile` and `synth`: raster-to-patch-grid extraction and the synthetic
// oracle dataset generator.
#include <fstream>
#include <iostream>
#include <memory>

#include "cers/errors.hpp"
#include "cers/image.hpp"
#include "cers/synthetic.hpp"
#include "cers/tiler.hpp"
#include "commands.hpp"
#include "config.hpp"

namespace cers::cli {

namespace {

struct TileParams {
  std::string config;
  std::string thumb;
  std::string out;
  double thumb_mag = 1.25;
  double target_mag = 20.0;
  int patch = 256;
  double min_frac = 0.5;
  double sample_frac = 0.0;       // 0 disables fraction sampling
  std::int64_t sample_count = -1; // -1 disables count sampling
  int median_window = 7;
  int closing_radius = 4;
  int min_area = 64;
  int min_hole = 64;
  std::string uniform_policy = "tissue";
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_tile(TileParams& p) {
  if (p.thumb.empty()) throw ConfigError("missing required option: thumb");
  if (p.out.empty()) throw ConfigError("missing required option: out");
  if (p.sample_frac > 0.0 && p.sample_count >= 0)
    throw ConfigError("sample_frac and sample_count are mutually exclusive");
  if (p.uniform_policy != "tissue" && p.uniform_policy != "background")
    throw ConfigError("uniform_policy must be 'tissue' or 'background'");

  const Thumbnail thumb = read_thumbnail(p.thumb, p.thumb_mag);
  TissueMask mask = segment_tissue(thumb);
  if (mask.degenerate) {
    std::cerr << "note: uniform image, no bimodality; resolving as "
              << p.uniform_policy << "\n";
    if (p.uniform_policy == "tissue") mask = resolve_degenerate(mask);
    else mask.degenerate = false;
  }
  RefineParams refine;
  refine.median_window = p.median_window;
  refine.closing_radius = p.closing_radius;
  refine.min_component_area = p.min_area;
  refine.min_hole_area = p.min_hole;
  mask = refine_mask(mask, refine);

  PatchGrid grid =
      extract_patch_grid(mask, p.thumb_mag, p.target_mag, p.patch, p.min_frac);
  if (p.sample_frac > 0.0)
    grid = sample_patch_subset(grid, SampleStrategy::Fraction(p.sample_frac), p.seed);
  else if (p.sample_count >= 0)
    grid = sample_patch_subset(
        grid, SampleStrategy::FixedCount(static_cast<std::size_t>(p.sample_count)),
        p.seed);

  std::ofstream out(p.out, std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.out);
  write_patch_csv(grid, out);
  std::cout << "patches=" << grid.coords.size() << " config_hash="
            << p.registry.hash("tile") << "\n";
}

struct SynthParams {
  std::string config;
  std::string out_dir;
  int bags_per_class = 100;
  int instances = 50;
  int dim = 32;
  int k_signal = 3;
  double mu = 6.0;
  double nu = 6.0;
  int ood_bags = 0;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_synth(SynthParams& p) {
  if (p.out_dir.empty()) throw ConfigError("missing required option: out_dir");

  SyntheticSpec spec;
  spec.bags_per_class = p.bags_per_class;
  spec.instances_per_bag = p.instances;
  spec.dim = p.dim;
  spec.signal_count = p.k_signal;
  spec.separation = p.mu;
  spec.ood_shift = p.nu;
  spec.ood_bags = p.ood_bags;
  spec.seed = p.seed;
  const SyntheticDataset data = generate_synthetic_bags(spec);

  const std::filesystem::path root(p.out_dir);
  std::filesystem::create_directories(root / "bags");

  auto store = [&](const std::vector<SyntheticBag>& bags) {
    std::vector<ManifestEntry> entries;
    for (const auto& s : bags) {
      const std::string rel = "bags/" + s.bag.slide_id + ".ceb";
      write_bag_file(s.bag, root / rel);
      entries.push_back({s.bag.slide_id, s.bag.label ? *s.bag.label : -1, rel,
                         static_cast<std::int32_t>(s.signal_indices.size())});
    }
    return entries;
  };
  write_manifest(store(data.labeled), root / "manifest.csv");
  if (!data.ood.empty())
    write_manifest(store(data.ood), root / "manifest_ood.csv");

  std::cout << "bags=" << data.labeled.size() << " ood=" << data.ood.size()
            << " config_hash=" << p.registry.hash("synth") << "\n";
}

}  // namespace

void register_tile(CLI::App& app) {
  auto p = std::make_shared<TileParams>();
  CLI::App* sub = app.add_subcommand(
      "tile", "Segment a slide thumbnail and emit a patch-grid CSV");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--thumb", p->thumb, "PNG or P6 PPM thumbnail"),
                   "thumb", p->thumb);
  p->registry.bind(sub->add_option("--out", p->out, "output CSV path"), "out", p->out);
  p->registry.bind(sub->add_option("--thumb-mag", p->thumb_mag, "thumbnail magnification"),
                   "thumb_mag", p->thumb_mag);
  p->registry.bind(sub->add_option("--target-mag", p->target_mag, "patch magnification"),
                   "target_mag", p->target_mag);
  p->registry.bind(sub->add_option("--patch", p->patch, "patch side in pixels"),
                   "patch", p->patch);
  p->registry.bind(sub->add_option("--min-frac", p->min_frac, "minimum tissue fraction"),
                   "min_frac", p->min_frac);
  p->registry.bind(
      sub->add_option("--sample-frac", p->sample_frac, "keep this fraction of patches"),
      "sample_frac", p->sample_frac);
  p->registry.bind(
      sub->add_option("--sample-count", p->sample_count, "keep this many patches"),
      "sample_count", p->sample_count);
  p->registry.bind(sub->add_option("--median-window", p->median_window, ""),
                   "median_window", p->median_window);
  p->registry.bind(sub->add_option("--closing-radius", p->closing_radius, ""),
                   "closing_radius", p->closing_radius);
  p->registry.bind(sub->add_option("--min-area", p->min_area, ""), "min_area",
                   p->min_area);
  p->registry.bind(sub->add_option("--min-hole", p->min_hole, ""), "min_hole",
                   p->min_hole);
  p->registry.bind(sub->add_option("--uniform-policy", p->uniform_policy,
                                   "degenerate image policy: tissue|background"),
                   "uniform_policy", p->uniform_policy);
  p->registry.bind(sub->add_option("--seed", p->seed, "sampling seed"), "seed", p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_tile(*p);
  });
}

void register_synth(CLI::App& app) {
  auto p = std::make_shared<SynthParams>();
  CLI::App* sub = app.add_subcommand(
      "synth", "Generate the synthetic embedding-bag oracle dataset");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--out-dir", p->out_dir, "output directory"),
                   "out_dir", p->out_dir);
  p->registry.bind(
      sub->add_option("--bags-per-class", p->bags_per_class, "bags per class"),
      "bags_per_class", p->bags_per_class);
  p->registry.bind(sub->add_option("--instances", p->instances, "instances per bag"),
                   "instances", p->instances);
  p->registry.bind(sub->add_option("--dim", p->dim, "embedding dimension"), "dim",
                   p->dim);
  p->registry.bind(
      sub->add_option("--k-signal", p->k_signal, "signal instances per positive bag"),
      "k_signal", p->k_signal);
  p->registry.bind(sub->add_option("--mu", p->mu, "signal separation"), "mu", p->mu);
  p->registry.bind(sub->add_option("--nu", p->nu, "OOD shift"), "nu", p->nu);
  p->registry.bind(sub->add_option("--ood-bags", p->ood_bags, "OOD bag count"),
                   "ood_bags", p->ood_bags);
  p->registry.bind(sub->add_option("--seed", p->seed, "generation seed"), "seed",
                   p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_synth(*p);
  });
}

}  // namespace cers::cli
