#include "lwipsm/counters.hpp"

namespace lwipsm {

OperationCounters& OperationCounters::operator+=(const OperationCounters& o) {
    asym_ops += o.asym_ops;
    hashes += o.hashes;
    macs += o.macs;
    arithmetic += o.arithmetic;
    random_generations += o.random_generations;
    db_ops += o.db_ops;
    ledger_ops += o.ledger_ops;
    asym_keygens += o.asym_keygens;
    sym_keygens += o.sym_keygens;
    token_generations += o.token_generations;
    program_list_generations += o.program_list_generations;
    return *this;
}

std::vector<std::pair<std::string, std::uint64_t>> OperationCounters::fields() const {
    return {{"asym_ops", asym_ops},
            {"hashes", hashes},
            {"macs", macs},
            {"arithmetic", arithmetic},
            {"random_generations", random_generations},
            {"db_ops", db_ops},
            {"ledger_ops", ledger_ops},
            {"asym_keygens", asym_keygens},
            {"sym_keygens", sym_keygens},
            {"token_generations", token_generations},
            {"program_list_generations", program_list_generations}};
}

}  // namespace lwipsm
