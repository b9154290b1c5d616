n = 3
qregA = QuantumRegister(2)
cregA = ClassicalRegister(n)
qregB = QuantumRegister(2)
cregB = ClassicalRegister(2)
outer = QuantumCircuit(qregA, cregA)
outer.add_register(qregB, cregB)
inner = QuantumCircuit(2, 2)
outer.append(inner.to_instruction(), [0, 1])
x = 1

outer.h(qregA[0])
outer.h(qregA[1])
outer.cx(qregB[0], qregB[1])
outer.x(qregA[0])
outer.y(qregB[1])
outer.z(qregA[1])
outer.measure(qregB[0], cregB[0])
outer.measure(qregA[0], cregA[0])
