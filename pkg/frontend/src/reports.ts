// Reports page: CSV artifacts as sortable tables plus the SelfBLEU-vs-facet
// scatter built from uncertainty.csv group rows. All numbers come from the
// server's files verbatim.

import { ApiClient } from "./api.js";
import { parseCsv } from "./csv.js";

export async function renderReports(container: HTMLElement, api: ApiClient): Promise<void> {
  container.replaceChildren();
  const names = await api.listReports();
  const csvNames = names.filter((n) => n.endsWith(".csv"));
  if (csvNames.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No report artifacts yet. Run `hypobench report` first.";
    container.appendChild(empty);
    return;
  }
  for (const name of csvNames) {
    const text = await api.fetchReport(name);
    const rows = parseCsv(text);
    const section = document.createElement("section");
    const heading = document.createElement("h2");
    heading.textContent = name;
    section.append(heading, buildSortableTable(rows));
    if (name === "uncertainty.csv") {
      const groups = rows.filter((r) => r["row_type"] === "group");
      const scatter = buildScatter(groups);
      if (scatter) section.appendChild(scatter);
    }
    container.appendChild(section);
  }
}

export function buildSortableTable(rows: Record<string, string>[]): HTMLTableElement {
  const table = document.createElement("table");
  table.className = "report-table";
  if (rows.length === 0) {
    const caption = document.createElement("caption");
    caption.textContent = "(no rows)";
    table.appendChild(caption);
    return table;
  }
  const columns = Object.keys(rows[0]!);
  const thead = document.createElement("thead");
  const head = document.createElement("tr");
  thead.appendChild(head);
  const body = document.createElement("tbody");
  table.append(thead, body);

  const renderBody = (ordered: Record<string, string>[]) => {
    body.replaceChildren();
    for (const row of ordered) {
      const tr = document.createElement("tr");
      for (const column of columns) {
        const td = document.createElement("td");
        td.textContent = row[column] ?? "";
        tr.appendChild(td);
      }
      body.appendChild(tr);
    }
  };

  let sortedBy = "";
  let ascending = true;
  for (const column of columns) {
    const th = document.createElement("th");
    th.textContent = column;
    th.addEventListener("click", () => {
      ascending = sortedBy === column ? !ascending : true;
      sortedBy = column;
      const ordered = [...rows].sort((a, b) => {
        const left = a[column] ?? "";
        const right = b[column] ?? "";
        const ln = Number(left);
        const rn = Number(right);
        const cmp = !Number.isNaN(ln) && !Number.isNaN(rn) && left !== "" && right !== ""
          ? ln - rn
          : left.localeCompare(right);
        return ascending ? cmp : -cmp;
      });
      renderBody(ordered);
    });
    head.appendChild(th);
  }
  renderBody(rows);
  return table;
}

const SCATTER_SERIES: ReadonlyArray<readonly [string, string]> = [
  ["mean_novelty", "#c0392b"],
  ["mean_verifiability", "#2980b9"],
];

export function buildScatter(groups: Record<string, string>[]): SVGSVGElement | null {
  if (groups.length === 0) return null;
  const width = 420;
  const height = 260;
  const pad = 36;
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.classList.add("uncertainty-scatter");
  for (const [facet, color] of SCATTER_SERIES) {
    for (const group of groups) {
      const x = Number(group["self_bleu"]);
      const y = Number(group[facet]);
      if (Number.isNaN(x) || Number.isNaN(y)) continue;
      const circle = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      circle.setAttribute("cx", String(pad + x * (width - 2 * pad)));
      circle.setAttribute("cy", String(height - pad - (y / 3) * (height - 2 * pad)));
      circle.setAttribute("r", "4");
      circle.setAttribute("fill", color);
      circle.dataset.setting = group["setting"] ?? "";
      circle.dataset.facet = facet;
      svg.appendChild(circle);
    }
  }
  return svg;
}
