import { RecourseApi } from './api';
import { renderApp } from './render';
import { ExplorerStore } from './store';

// Everything re-renders from scratch on each store notification; the active
// control is put back afterwards so typing into an input survives the wipe.
function mount(root: HTMLElement, store: ExplorerStore) {
  const redraw = () => {
    const active = document.activeElement as HTMLElement | null;
    const activeId = active?.id;
    renderApp(root, store);
    if (activeId) {
      const again = document.getElementById(activeId);
      if (again instanceof HTMLElement) again.focus();
    }
  };
  store.subscribe(redraw);
  redraw();
}

const root = document.getElementById('app');
if (root) {
  const store = new ExplorerStore(new RecourseApi(''));
  mount(root, store);
  void store.init();
}
