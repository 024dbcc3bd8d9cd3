#include "beampower/ga.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "beampower/util.hpp"

namespace beampower {

void GaConfig::validate() const {
  if (population < 2) throw std::invalid_argument("ga: population must be >= 2");
  if (iterations < 1) throw std::invalid_argument("ga: iterations must be >= 1");
  if (tournament_k < 1 || tournament_k > population) {
    throw std::invalid_argument("ga: tournament_k outside [1, population]");
  }
  if (crossover_rate < 0.0 || crossover_rate > 1.0) {
    throw std::invalid_argument("ga: crossover_rate outside [0,1]");
  }
  if (!(mutation_sigma >= 0.0)) throw std::invalid_argument("ga: mutation_sigma must be >= 0");
  if (elitism < 0 || elitism >= population) {
    throw std::invalid_argument("ga: elitism must be in [0, population)");
  }
  if (n_workers < 1) throw std::invalid_argument("ga: n_workers must be >= 1");
}

double evaluate_fitness(std::span<const double> genes,
                        std::span<const double> demand_row,
                        const SatelliteConfig& config, double alpha) {
  return evaluate_step(genes, demand_row, config, alpha).reward;
}

namespace {

constexpr double kUnevaluated = std::numeric_limits<double>::quiet_NaN();

// Scores every individual still carrying NaN fitness; slices are disjoint so
// worker threads never touch the same element.
void evaluate_range(std::vector<Individual>& pop, std::size_t begin, std::size_t end,
                    std::span<const double> demand_row,
                    const SatelliteConfig& config, double alpha) {
  for (std::size_t i = begin; i < end; ++i) {
    if (std::isnan(pop[i].fitness)) {
      pop[i].fitness = evaluate_fitness(pop[i].genes, demand_row, config, alpha);
    }
  }
}

void evaluate_population(std::vector<Individual>& pop,
                         std::span<const double> demand_row,
                         const SatelliteConfig& config, double alpha,
                         int n_workers) {
  if (n_workers <= 1 || pop.size() < 2 * static_cast<std::size_t>(n_workers)) {
    evaluate_range(pop, 0, pop.size(), demand_row, config, alpha);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  const std::size_t chunk = (pop.size() + n_workers - 1) / n_workers;
  for (int w = 0; w < n_workers; ++w) {
    std::size_t b = w * chunk;
    std::size_t e = std::min(pop.size(), b + chunk);
    if (b >= e) break;
    workers.emplace_back(evaluate_range, std::ref(pop), b, e, demand_row,
                         std::cref(config), alpha);
  }
  for (auto& w : workers) w.join();
}

int tournament_pick(const std::vector<Individual>& pop, int k,
                    std::mt19937_64& rng) {
  std::uniform_int_distribution<int> draw(0, static_cast<int>(pop.size()) - 1);
  int best = draw(rng);
  for (int i = 1; i < k; ++i) {
    int cand = draw(rng);
    if (pop[cand].fitness > pop[best].fitness) best = cand;
  }
  return best;
}

}  // namespace

GaResult run_ga(std::span<const double> demand_row, const SatelliteConfig& config,
                double alpha, const GaConfig& ga_cfg) {
  ga_cfg.validate();
  const int nb = config.n_beams();
  const double mut_rate =
      ga_cfg.mutation_rate > 0.0 ? ga_cfg.mutation_rate : 1.0 / nb;
  auto rng = make_rng(ga_cfg.seed, 0x67615f72ULL);

  std::vector<Individual> pop(ga_cfg.population);
  for (auto& ind : pop) {
    std::vector<double> genes(nb);
    for (int b = 0; b < nb; ++b) genes[b] = uniform(rng, 0.0, config.p_max_w[b]);
    ind.genes = clip_action(std::move(genes), config).p_w;
    ind.fitness = kUnevaluated;
  }
  evaluate_population(pop, demand_row, config, alpha, ga_cfg.n_workers);

  auto by_fitness_desc = [](const Individual& a, const Individual& b) {
    return a.fitness > b.fitness;
  };
  std::sort(pop.begin(), pop.end(), by_fitness_desc);

  GaResult result;
  result.history.reserve(ga_cfg.iterations);
  std::vector<Individual> next;
  next.reserve(pop.size());

  for (int gen = 0; gen < ga_cfg.iterations; ++gen) {
    // Coarse search early, fine tuning late: the mutation scale anneals from
    // mutation_sigma down to 2% of it by the final generation.
    const double anneal =
        std::pow(0.02, static_cast<double>(gen) /
                           std::max(1, ga_cfg.iterations - 1));
    next.clear();
    for (int e = 0; e < ga_cfg.elitism; ++e) next.push_back(pop[e]);

    while (next.size() < pop.size()) {
      const auto& p1 = pop[tournament_pick(pop, ga_cfg.tournament_k, rng)];
      const auto& p2 = pop[tournament_pick(pop, ga_cfg.tournament_k, rng)];
      Individual child;
      child.genes.resize(nb);
      const bool cross = uniform(rng, 0.0, 1.0) < ga_cfg.crossover_rate;
      bool changed = cross;
      for (int b = 0; b < nb; ++b) {
        double g = p1.genes[b];
        if (cross) {
          // Per-gene arithmetic blend between the two parents.
          double u = uniform(rng, 0.0, 1.0);
          g = u * p1.genes[b] + (1.0 - u) * p2.genes[b];
        }
        if (uniform(rng, 0.0, 1.0) < mut_rate) {
          g += normal(rng, 0.0,
                      anneal * ga_cfg.mutation_sigma * config.p_max_w[b]);
          changed = true;
        }
        child.genes[b] = g;
      }
      child.genes = clip_action(std::move(child.genes), config).p_w;
      // A verbatim copy of a feasible parent keeps its score.
      child.fitness = changed ? kUnevaluated : p1.fitness;
      next.push_back(std::move(child));
    }

    evaluate_population(next, demand_row, config, alpha, ga_cfg.n_workers);
    pop.swap(next);
    std::sort(pop.begin(), pop.end(), by_fitness_desc);
    result.history.push_back(pop.front().fitness);
  }
  result.best = pop.front();
  return result;
}

GaSeriesResult run_ga_series(const DemandSeries& demand, int begin, int end,
                             int stride, const SatelliteConfig& config,
                             double alpha, const GaConfig& ga_cfg) {
  if (stride < 1) throw std::invalid_argument("ga series: stride must be >= 1");
  if (begin < 0 || end > demand.n_steps || begin >= end) {
    throw std::invalid_argument("ga series: bad sample range");
  }
  GaSeriesResult result;
  for (int t = begin; t < end; t += stride) {
    auto t0 = std::chrono::steady_clock::now();

    GaConfig per_step = ga_cfg;
    per_step.seed = mix_seed(ga_cfg.seed, static_cast<uint64_t>(t));
    auto run = run_ga(demand.row(t), config, alpha, per_step);

    auto ev = evaluate_step(run.best.genes, demand.row(t), config, alpha);
    double energy = 0.0;
    double opt_energy = 0.0;
    for (int b = 0; b < config.n_beams(); ++b) {
      energy += run.best.genes[b];
      opt_energy += ev.optimal_power_w[b];
    }
    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    result.rows.push_back({t, ev.usd, energy / opt_energy,
                           run.best.fitness, wall_ms});
    result.total_wall_ms += wall_ms;
  }
  return result;
}

void save_ga_series_csv(const GaSeriesResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ga series: cannot write " + path);
  out << "t,usd,energy_ratio,best_fitness,wall_ms\n";
  for (const auto& row : result.rows) {
    out << row.t << ',' << format_double(row.usd) << ','
        << format_double(row.energy_ratio) << ','
        << format_double(row.best_fitness) << ','
        << format_double(row.wall_ms) << '\n';
  }
}

}  // namespace beampower
