el.textContent = location.hash.slice(1);