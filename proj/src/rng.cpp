#include "mte/rng.hpp"

namespace mte {

std::string_view purpose_label(Purpose p) {
    switch (p) {
        case Purpose::head_init: return "head-init";
        case Purpose::shuffle: return "shuffle";
        case Purpose::dropout: return "dropout";
        case Purpose::random_mask: return "random-mask";
        case Purpose::bag_subset: return "bag-subset";
        case Purpose::data_gen: return "data-gen";
    }
    fail(ErrKind::contract, "unknown purpose");
}

}  // namespace mte
