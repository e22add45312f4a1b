/** Presentation-only texts: value labels and the category path colours. */

export const CATEGORY_COLORS: Record<string, string> = {
  ImLC: "#2d6cdf", // blue path
  SemS: "#e0a800", // yellow path
  ObD: "#2e8540",  // green path
  InS: "#d4509f",  // pink path
};

export const CATEGORY_NAMES: Record<string, string> = {
  ImLC: "Image-level classification",
  SemS: "Semantic segmentation",
  ObD: "Object detection",
  InS: "Instance segmentation",
};

const VALUE_LABELS: Record<string, Record<string, string>> = {
  "FP2.6": {
    "target-value": "target-value based",
    optimization: "optimization based",
    argmax: "argmax based",
    "cost-benefit": "cost-benefit based",
    none: "no decision rule applied",
  },
  "FP2.5.6": {
    existence: "by existence",
    "distance-contour-focus": "by distance, contour focus",
    "distance-outlier-focus": "by distance, outlier focus",
  },
  "FP2.4": {
    "overall-position": "overall position only",
    "rough-outline": "rough outline",
  },
  "FP4.4": {
    "exact-outline": "exact outline",
    "rough-outline": "rough outline",
    "center-point": "center point",
  },
  "FP2.7.2": {
    U1: "U1: compare re-calibration methods on one classifier",
    U2: "U2: compare calibration across classifiers",
    U3: "U3: compare overall performance across classifiers",
    none: "no comparative assessment",
  },
  "FP2.7.3": {
    "calibration-only": "calibration in isolation",
    "joint-with-discrimination": "jointly with discrimination",
    none: "no interpretability assessment",
  },
};

export function valueLabel(item: string, value: string | boolean): string {
  if (typeof value === "boolean") {
    return value ? "yes" : "no";
  }
  return VALUE_LABELS[item]?.[value] ?? value;
}

export const SIGN_SYMBOLS: Record<string, string> = {
  "+": "✓",
  "-": "✗",
  o: "•",
};
