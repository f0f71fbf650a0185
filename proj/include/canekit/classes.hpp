#pragma once

// The 17-class roster in canonical report order, name normalization, and
// the local three-section advisory knowledge base.

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace canekit {

inline constexpr std::size_t kNumClasses = 17;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "Banded Chlorosis", "Brown Rust", "Brown Spot",    "Dried Leaves", "Eye Spot", "Grassy Shoot",
    "Healthy",          "Mosaic",     "Pokkah Boeng",  "Red Rot",      "Red Leaf Spot", "Ring Spot",
    "Rust",             "Sett Rot",   "Smut",          "Viral Disease", "Yellow Leaf"};

/// Lowercase alphanumerics only, so "RedRot", "red_rot" and "Red Rot" agree.
inline std::string normalize_class_name(std::string_view name) {
    std::string out;
    for (unsigned char ch : name)
        if (std::isalnum(ch)) out.push_back(static_cast<char>(std::tolower(ch)));
    return out;
}

inline std::optional<std::size_t> class_index(std::string_view name) {
    const std::string key = normalize_class_name(name);
    if (key.empty()) return std::nullopt;
    for (std::size_t i = 0; i < kNumClasses; ++i)
        if (normalize_class_name(kClassNames[i]) == key) return i;
    return std::nullopt;
}

struct Advice {
    std::string_view cause;
    std::string_view immediate_steps;
    std::string_view long_term_control;
};

// clang-format off
inline constexpr std::array<Advice, kNumClasses> kKnowledgeBase = {{
    // Banded Chlorosis
    {"A physiological disorder, not an infection. Cold nights or sudden low temperatures injure the leaf while it is still rolled in the spindle, leaving pale cross bands once it unfurls.",
     "Confirm the bands run across the blade and that no spores or lesions are present. Avoid extra nitrogen or spraying, which will not reverse the bands.",
     "Favour cold-tolerant varieties in frost-prone fields, adjust planting dates so young spindles avoid the coldest weeks, and keep the crop well watered before cold spells."},
    // Brown Rust
    {"The rust fungus Puccinia melanocephala. Wind-borne spores produce small elongated brown pustules, mostly on the lower leaf surface, under mild humid weather.",
     "Survey neighbouring rows to gauge spread, remove heavily infected older leaves, and apply a registered triazole or strobilurin fungicide if more than a few percent of leaf area is covered.",
     "Plant resistant varieties, avoid excessive nitrogen, keep row spacing that lets the canopy dry, and monitor fields each season during humid spells."},
    // Brown Spot
    {"The fungus Cercospora longipes. Spores spread by wind and rain splash and cause oval red-brown spots, often with a yellow halo, on mature leaves.",
     "Remove and destroy badly spotted leaves, avoid overhead irrigation late in the day, and apply a recommended protective fungicide if spots are spreading quickly.",
     "Use tolerant varieties, maintain balanced potassium nutrition, clear crop residue after harvest, and rotate fields where the disease recurs."},
    // Dried Leaves
    {"Leaf drying usually reflects water stress, natural senescence of lower leaves, nutrient shortage or root damage rather than a single pathogen.",
     "Check soil moisture and irrigate if the root zone is dry, inspect roots and stalk bases for pests or rot, and strip dead trash leaves to improve airflow.",
     "Schedule irrigation to the crop stage, mulch to hold soil moisture, correct potassium and nitrogen deficiencies from soil tests, and control soil pests."},
    // Eye Spot
    {"The fungus Bipolaris sacchari. Wind and rain carry spores that produce elongated lesions with reddish centres and yellow margins that streak toward the leaf tip.",
     "Remove the most affected leaves, reduce nitrogen top-dressing for now, and apply a recommended fungicide on susceptible varieties during cool wet weather.",
     "Grow resistant varieties, avoid heavy nitrogen, and keep fields free of volunteer cane and grassy hosts that carry the fungus between seasons."},
    // Grassy Shoot
    {"A phytoplasma carried in infected planting setts and spread by sap-sucking leafhoppers. Stools throw many thin, pale, grass-like tillers.",
     "Rogue out and burn affected stools including roots, and control leafhopper vectors with a recommended insecticide in the surrounding area.",
     "Plant only certified disease-free seed cane, use hot-water or moist hot-air treatment of setts, avoid ratooning infected fields, and keep vector populations low."},
    // Healthy
    {"No disease symptoms detected. The leaf shows normal colour and texture.",
     "No treatment is needed. Keep scouting regularly and compare any new spots or discoloration against this baseline.",
     "Maintain balanced fertilisation, clean planting material, timely irrigation and field sanitation to keep the crop healthy."},
    // Mosaic
    {"Sugarcane mosaic virus and related potyviruses. Aphids transmit the virus, and infected setts carry it into new plantings, giving a patchy light and dark green mosaic.",
     "Mark and remove strongly affected stools, control aphids and nearby grassy weeds that host them, and do not take seed cane from this area.",
     "Use resistant varieties and virus-free seed cane from a certified nursery, manage weeds around fields, and monitor aphid build-up each season."},
    // Pokkah Boeng
    {"Fusarium fungi, chiefly Fusarium verticillioides. Air-borne spores infect the young spindle in warm humid weather, causing crumpled, twisted, chlorotic top leaves.",
     "Apply a recommended systemic fungicide to the spindle region on affected plants and remove stalks where the top has rotted.",
     "Plant tolerant varieties, avoid dense plantings and excess nitrogen during the monsoon, and destroy infected debris after harvest."},
    // Red Rot
    {"The fungus Colletotrichum falcatum. It survives in infected setts, soil and crop debris and also spreads through irrigation water, rain and wind; split stalks show red tissue with white patches.",
     "Uproot and burn affected clumps, stop irrigation water flowing from infected to healthy plots, and do not use cane from this field as seed.",
     "Plant resistant varieties with healthy, heat-treated setts, rotate with non-host crops for at least one season, avoid ratooning infected fields, and improve drainage."},
    // Red Leaf Spot
    {"The fungus Dimeriella sacchari. Small red spots appear on leaves and merge into larger lesions under favourable weather, with leaf tips most affected.",
     "Remove heavily spotted leaves, improve airflow by trash stripping, and apply a recommended protective fungicide if spots keep spreading.",
     "Choose tolerant varieties, keep nutrition balanced, clear infected residue after harvest, and avoid very dense canopies."},
    // Ring Spot
    {"The fungus Leptosphaeria sacchari. Spores carried by wind and rain cause oval spots with reddish-brown borders, mostly on older leaves.",
     "Strip and destroy older infected leaves; a fungicide is rarely needed because damage is usually light.",
     "Use clean seed cane, remove crop debris, and keep canopy ventilation good through proper spacing and trash management."},
    // Rust
    {"Rust fungi of the genus Puccinia, including the orange rust Puccinia kuehnii. Wind-blown spores form orange to brown pustules on the leaf underside.",
     "Scout the field to measure severity, remove badly infected leaves, and spray a registered fungicide when pustules cover a growing share of the leaf area.",
     "Grow resistant varieties, avoid excessive nitrogen, and plan planting dates to reduce exposure during humid, mild periods that favour rust."},
    // Sett Rot
    {"The fungus Ceratocystis paradoxa, which enters cut ends of planted setts in warm, waterlogged soil and rots them before they germinate.",
     "Gap-fill failed rows with treated setts and improve drainage in waterlogged patches.",
     "Treat setts with a recommended fungicide dip before planting, plant in well-drained soil at suitable temperatures, and avoid long storage of cut setts."},
    // Smut
    {"The fungus Sporisorium scitamineum. Infected stools produce a long black whip from the growing point that releases wind-borne spores.",
     "Cover each whip with a bag before cutting it so spores are not released, then uproot and burn the infected stool.",
     "Plant resistant varieties and heat-treated healthy setts, limit ratoon cycles in infected fields, and rogue whips promptly each season."},
    // Viral Disease
    {"One of several sugarcane viruses, such as streak mosaic or leaf fleck viruses, usually introduced through infected seed cane and spread by insect vectors.",
     "Isolate suspect stools, remove severely affected plants, and control sap-sucking insects in and around the field.",
     "Source virus-tested planting material, use tolerant varieties, manage vectors and weed hosts, and disinfect cutting tools between fields."},
    // Yellow Leaf
    {"Sugarcane yellow leaf virus, spread by the aphid Melanaphis sacchari and by infected setts. The underside of the midrib turns yellow, spreading outward along the blade.",
     "Control aphids with a recommended insecticide, remove strongly affected stools, and avoid using this crop as seed.",
     "Plant virus-free seed cane from tissue-culture nurseries, choose tolerant varieties, and monitor aphid populations through the season."},
}};
// clang-format on

}  // namespace canekit
