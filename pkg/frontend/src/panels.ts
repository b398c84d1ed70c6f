/** Which of the fixed legend colors a series uses. */
export type ColorRole = "altruistic" | "coalition" | "neutral";

export interface SeriesSpec {
  column: string;
  label: string;
  role: ColorRole;
}

export interface PanelSpec {
  name: string;
  /** Path of the CSV under the input directory. */
  inputCsv: string;
  /** Column providing the x axis. */
  x: string;
  series: SeriesSpec[];
  yLabel: string;
  title: string;
}

export const ROLE_COLORS: Record<ColorRole, string> = {
  altruistic: "#2b6cb0",
  coalition: "#c53030",
  neutral: "#2d3748",
};

export const PANELS: Record<string, PanelSpec> = {
  fork_length: {
    name: "fork_length",
    inputCsv: "fork_length/metrics.csv",
    x: "coalition-size",
    series: [{ column: "longest_fork", label: "longest fork", role: "neutral" }],
    yLabel: "Longest fork (blocks)",
    title: "Longest fork vs Byzantine coalition size",
  },
  chain_quality: {
    name: "chain_quality",
    inputCsv: "chain_quality/metrics.csv",
    x: "coalition-size",
    series: [
      { column: "quality_altruistic", label: "altruistic", role: "altruistic" },
      { column: "quality_coalition", label: "byzantine", role: "coalition" },
    ],
    yLabel: "Main-chain block fraction",
    title: "Main-chain share by class vs Byzantine coalition size",
  },
  rational_payoff: {
    name: "rational_payoff",
    inputCsv: "rational_payoff/metrics.csv",
    x: "coalition-size",
    series: [
      { column: "payoff_altruistic", label: "altruistic", role: "altruistic" },
      { column: "payoff_coalition", label: "rational", role: "coalition" },
    ],
    yLabel: "Mean payoff per player",
    title: "Payoffs vs rational coalition size",
  },
  immunity: {
    name: "immunity",
    inputCsv: "immunity/metrics.csv",
    x: "coalition-size",
    series: [
      { column: "payoff_altruistic", label: "altruistic", role: "altruistic" },
      { column: "payoff_coalition", label: "byzantine", role: "coalition" },
    ],
    yLabel: "Mean payoff per player",
    title: "Altruistic payoff immunity vs Byzantine coalition size",
  },
};

export const PANEL_NAMES = Object.keys(PANELS);
