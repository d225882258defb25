#pragma once

#include <string>
#include <vector>

#include "avex/corpus.hpp"

namespace avex::fixtures {

// Deterministic toy dataset: 3 categories x 20 offers, 5 attributes each,
// every slot populated. Titles embed the attribute values (so the dict
// baseline has something to find) plus a unique model token, and no title
// is a substring of another.
inline Dataset toy_dataset() {
    Dataset d;
    d.name = "toy";
    const std::vector<std::string> categories = {"widget", "gadget", "gizmo"};
    const std::vector<std::string> colors = {"Crimson", "Azure", "Emerald", "Amber", "Ivory"};
    const std::vector<std::string> sizes = {"Small", "Medium", "Large", "Mini", "Jumbo"};
    const std::vector<std::string> materials = {"Steel", "Oak", "Nylon", "Ceramic", "Bamboo"};

    for (const auto& category : categories) {
        std::string cap = category;
        cap[0] = static_cast<char>(cap[0] - 'a' + 'A');
        for (int i = 0; i < 20; ++i) {
            ProductOffer o;
            char num[8];
            std::snprintf(num, sizeof(num), "%02d", i);
            o.offer_id = category + "-" + num;
            o.category = category;
            std::string brand = cap + "Co" + num;
            std::string color = colors[i % colors.size()];
            std::string size = sizes[(i / 5) % sizes.size()];
            std::string material = materials[(i / 4) % materials.size()];
            std::string weight = std::to_string(100 + i * 7) + "g";
            o.truth = {{"Brand", brand},
                       {"Color", color},
                       {"Size", size},
                       {"Material", material},
                       {"Weight", weight}};
            o.title = brand + " " + cap + " " + color + " " + size + " " + material + " " +
                      weight + " model " + cap.substr(0, 2) + num;
            d.offers.push_back(std::move(o));
        }
        d.categories.insert(category);
    }
    return d;
}

inline ProductOffer make_offer(const std::string& id, const std::string& category,
                               const std::string& title,
                               std::map<std::string, std::string> truth) {
    ProductOffer o;
    o.offer_id = id;
    o.category = category;
    o.title = title;
    o.truth = std::move(truth);
    return o;
}

}  // namespace avex::fixtures
