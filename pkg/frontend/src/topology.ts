import type { Topology, TopologyLink } from "./types.js";

/** Merge topology snapshots from several gateways into one picture.
 *
 * Each gateway reports the links its own organization participates in, so
 * the same link usually arrives twice (once per endpoint). Links are keyed
 * by their sorted endpoint pair and their shared-service sets unioned.
 */
export function mergeTopologies(snapshots: Topology[]): Topology {
  const orgs = new Set<string>();
  const links = new Map<string, TopologyLink>();
  let newest = 0;
  for (const snap of snapshots) {
    newest = Math.max(newest, snap.generated_at);
    for (const org of snap.orgs) orgs.add(org);
    for (const link of snap.links) {
      const [a, b] = [link.a, link.b].sort();
      const key = `${a}--${b}`;
      const existing = links.get(key);
      if (existing) {
        existing.shared = [...new Set([...existing.shared, ...link.shared])].sort();
      } else {
        links.set(key, { a, b, shared: [...link.shared].sort() });
      }
    }
  }
  return {
    orgs: [...orgs].sort(),
    links: [...links.values()].sort((x, y) => x.a.localeCompare(y.a) || x.b.localeCompare(y.b)),
    generated_at: newest,
  };
}

/** Links that carry at least one shared service (the visible overlaps). */
export function activeLinks(topology: Topology): TopologyLink[] {
  return topology.links.filter((l) => l.shared.length > 0);
}
