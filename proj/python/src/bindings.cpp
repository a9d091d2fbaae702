#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "permnet/baselines.hpp"
#include "permnet/dpn.hpp"
#include "permnet/env.hpp"
#include "permnet/experiment.hpp"
#include "permnet/gumbel.hpp"
#include "permnet/learner.hpp"
#include "permnet/mixer.hpp"
#include "permnet/networks.hpp"
#include "permnet/rollout.hpp"

namespace py = pybind11;
using namespace permnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Array flat_observations(const Environment& env) {
  return to_array(stack_observations(env.observations(), env.layout()));
}

py::array_t<unsigned char> masks(const Environment& env) {
  const auto m = env.available_actions();
  py::array_t<unsigned char> out({m.size(), env.n_actions()});
  for (std::size_t i = 0; i < m.size(); ++i) std::copy(m[i].begin(), m[i].end(), out.mutable_data() + i * env.n_actions());
  return out;
}

struct PyEnv {
  std::unique_ptr<Environment> env;
};

struct PyAgent {
  std::unique_ptr<AgentNetwork> net;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Permutation-invariant agent networks for multi-agent value decomposition";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

  m.def("gumbel_softmax",
        [](const Array& logits, double tau, bool hard, bool deterministic, std::uint64_t seed) {
          Rng rng(seed);
          return to_array(gumbel_softmax(to_tensor(logits), GumbelConfig{tau, hard, deterministic}, &rng));
        },
        py::arg("logits"), py::arg("tau") = 1.0, py::arg("hard") = true,
        py::arg("deterministic") = false, py::arg("seed") = 0);
  m.def("sinkhorn_normalize",
        [](const Array& logits, std::size_t iterations, double tau) {
          return to_array(sinkhorn_normalize(to_tensor(logits), iterations, tau));
        },
        py::arg("logits"), py::arg("iterations") = 20, py::arg("tau") = 1.0);
  m.def("assign_rows",
        [](const Array& slot_logits) {
          return to_array(assign_rows(to_tensor(slot_logits), GumbelConfig{0.5, true, true}, nullptr));
        },
        py::arg("slot_logits"));
  m.def("is_permutation_matrix", [](const Array& a) {
    if (a.ndim() != 2) return false;
    return is_permutation_matrix(std::span<const double>(a.data(), a.size()), a.shape(0), a.shape(1));
  });

  py::class_<DpnNet>(m, "DpnNet")
      .def(py::init([](std::size_t entity_dim, std::size_t width, std::size_t hidden_dim, double tau,
                       std::uint64_t seed) {
             Rng rng(seed);
             return DpnNet(entity_dim, width, hidden_dim, GumbelConfig{tau, true, false}, rng);
           }),
           py::arg("entity_dim"), py::arg("width"), py::arg("hidden_dim") = 8, py::arg("tau") = 0.5,
           py::arg("seed") = 0)
      .def("permutation_matrix",
           [](const DpnNet& net, const Array& entities, bool deterministic, std::uint64_t seed) {
             Rng rng(seed);
             return to_array(generate_permutation_matrix(net, to_tensor(entities), deterministic, &rng));
           },
           py::arg("entities"), py::arg("deterministic") = true, py::arg("seed") = 0);

  py::class_<PyAgent>(m, "AgentNetwork")
      .def(py::init([](const std::string& architecture, const std::string& preset, std::uint64_t seed) {
             Rng rng(seed);
             return PyAgent{make_agent_network(parse_architecture(architecture),
                                               battle_preset(preset).layout(), NetworkConfig{}, rng)};
           }),
           py::arg("architecture"), py::arg("preset") = "3v3", py::arg("seed") = 0)
      .def("forward",
           [](const PyAgent& a, const Array& obs) { return to_array(a.net->forward(to_tensor(obs))); },
           py::arg("obs"))
      .def_property_readonly("kind", [](const PyAgent& a) { return std::string(a.net->kind()); })
      .def_property_readonly("parameter_count", [](const PyAgent& a) { return count_parameters(*a.net); })
      .def_property_readonly("obs_dim", [](const PyAgent& a) { return a.net->layout().obs_dim(); })
      .def_property_readonly("n_actions", [](const PyAgent& a) { return a.net->layout().n_actions(); });

  m.def("architectures", [] {
    std::vector<std::string> names;
    for (Architecture a : all_architectures()) names.emplace_back(architecture_name(a));
    return names;
  });
  m.def("hpn_parameter_count",
        [](const std::string& preset) { return hpn_parameter_count(battle_preset(preset).layout(), HpnConfig{}); });

  m.def("vdn_mix", [](const std::vector<double>& q) { return vdn_mix(q); });
  py::class_<QmixMixer>(m, "QmixMixer")
      .def(py::init([](std::size_t n_agents, std::size_t state_dim, std::size_t embed, std::size_t hypernet,
                       std::uint64_t seed) {
             Rng rng(seed);
             return QmixMixer(n_agents, state_dim, QmixConfig{embed, hypernet}, rng);
           }),
           py::arg("n_agents"), py::arg("state_dim"), py::arg("mixing_embed_dim") = 32,
           py::arg("hypernet_embed") = 64, py::arg("seed") = 0)
      .def("mix", [](const QmixMixer& mixer, const std::vector<double>& q,
                     const std::vector<double>& state) { return qmix_mix(mixer, q, state); });

  m.def("td_lambda_targets",
        [](const std::vector<double>& rewards, const std::vector<double>& next_values, bool terminated,
           double gamma, double lam) { return td_lambda_targets(rewards, next_values, terminated, gamma, lam); },
        py::arg("rewards"), py::arg("next_values"), py::arg("terminated"), py::arg("gamma"), py::arg("td_lambda"));
  m.def("epsilon",
        [](std::size_t step, double start, double finish, std::size_t anneal) {
          return EpsilonSchedule{start, finish, anneal}.value(step);
        },
        py::arg("env_steps"), py::arg("start") = 1.0, py::arg("finish") = 0.05, py::arg("anneal_steps") = 100000);

  py::class_<PyEnv>(m, "BattleEnv")
      .def(py::init([](const std::string& preset, bool shuffle, std::uint64_t shuffle_seed) {
             return PyEnv{make_environment(battle_preset(preset), shuffle, shuffle_seed)};
           }),
           py::arg("preset") = "3v3", py::arg("shuffle") = false, py::arg("shuffle_seed") = 0)
      .def("reset", [](PyEnv& e, std::uint64_t seed) { e.env->reset(seed); }, py::arg("seed"))
      .def("step",
           [](PyEnv& e, const std::vector<int>& actions) {
             const StepResult r = e.env->step(actions);
             return py::dict(py::arg("reward") = r.reward, py::arg("terminated") = r.terminated,
                             py::arg("truncated") = r.truncated, py::arg("won") = r.won);
           })
      .def("observations", [](const PyEnv& e) { return flat_observations(*e.env); })
      .def("available_actions", [](const PyEnv& e) { return masks(*e.env); })
      .def("state", [](const PyEnv& e) { return e.env->state(); })
      .def_property_readonly("finished", [](const PyEnv& e) { return e.env->finished(); })
      .def_property_readonly("n_agents", [](const PyEnv& e) { return e.env->n_agents(); })
      .def_property_readonly("n_actions", [](const PyEnv& e) { return e.env->n_actions(); });

  m.def("evaluate_greedy",
        [](const PyAgent& agent, PyEnv& env, std::size_t episodes, std::uint64_t seed) {
          return evaluate(greedy_policy(*agent.net), *env.env, episodes, seed);
        },
        py::arg("agent"), py::arg("env"), py::arg("episodes") = 32, py::arg("seed") = 0);

  m.def("train",
        [](const std::string& config_text, std::uint64_t seed) {
          const ExperimentConfig config = parse_experiment_config(config_text);
          std::vector<EvalRow> rows;
          {
            py::gil_scoped_release release;
            rows = train_seed(config, seed);
          }
          py::list out;
          for (const auto& r : rows) out.append(py::make_tuple(r.env_steps, r.win_rate, r.loss));
          return out;
        },
        py::arg("config"), py::arg("seed") = 0);
  m.def("percentile", [](std::vector<double> v, double q) { return percentile(std::move(v), q); });
}
