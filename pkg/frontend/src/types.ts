// Wire shapes shared with the graph service. Field names match the JSON
// bodies exactly; do not rename them.

export interface GraphNode {
  id: string;
  label: string;
  precondition?: string;
  postcondition?: string;
}

export interface GraphEdge {
  from: string;
  to: string;
  label: string;
}

export interface AttackGraph {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface GraphListing {
  graph_id: number;
  created_at: string;
  query_text: string;
}
