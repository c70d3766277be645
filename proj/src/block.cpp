#include "cosim/block.hpp"

namespace cosim {

namespace {

template <class... Ts> struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

} // namespace

std::size_t arity(const BlockKind& kind) {
  return std::visit(Overloaded{
                        [](const Constant&) -> std::size_t { return 0; },
                        [](const Step&) -> std::size_t { return 0; },
                        [](const Gain&) -> std::size_t { return 1; },
                        [](const Sum& s) -> std::size_t { return s.signs.size(); },
                        [](const Limiter&) -> std::size_t { return 1; },
                        [](const Integrator&) -> std::size_t { return 1; },
                        [](const FirstOrderLag&) -> std::size_t { return 1; },
                        [](const UnitDelay&) -> std::size_t { return 1; },
                        [](const Sine&) -> std::size_t { return 1; },
                        [](const Product&) -> std::size_t { return 2; },
                        [](const External&) -> std::size_t { return 1; },
                    },
                    kind);
}

bool is_memory_kind(const BlockKind& kind) {
  return std::holds_alternative<Integrator>(kind) || std::holds_alternative<FirstOrderLag>(kind) ||
         std::holds_alternative<UnitDelay>(kind);
}

const char* kind_name(const BlockKind& kind) {
  return std::visit(Overloaded{
                        [](const Constant&) { return "constant"; },
                        [](const Gain&) { return "gain"; },
                        [](const Sum&) { return "sum"; },
                        [](const Limiter&) { return "limiter"; },
                        [](const Step&) { return "step"; },
                        [](const Integrator&) { return "integrator"; },
                        [](const FirstOrderLag&) { return "first_order_lag"; },
                        [](const UnitDelay&) { return "unit_delay"; },
                        [](const Sine&) { return "sine"; },
                        [](const Product&) { return "product"; },
                        [](const External&) { return "external"; },
                    },
                    kind);
}

} // namespace cosim
